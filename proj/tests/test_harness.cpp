#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltnas/harness.hpp"
#include "ltnas/imbalance.hpp"
#include "ltnas/rng.hpp"

using namespace ltnas;
using namespace ltnas::harness;
namespace fs = std::filesystem;

namespace {

std::vector<uint8_t> make_cifar_records(int n, int classes, uint64_t seed) {
  Rng rng(seed);
  std::vector<uint8_t> bytes;
  for (int i = 0; i < n; ++i) {
    bytes.push_back(static_cast<uint8_t>(i % classes));
    for (int k = 0; k < 3072; ++k)
      bytes.push_back(static_cast<uint8_t>(rng.uniform_int(0, 255)));
  }
  return bytes;
}

void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<double> class_mean(const imbalance::LabeledDataset& d, int cls) {
  std::vector<double> mean(d.feature_dims(), 0.0);
  int n = 0;
  for (int i = 0; i < d.size(); ++i) {
    if (d.labels[i] != cls) continue;
    ++n;
    for (int k = 0; k < d.feature_dims(); ++k) mean[k] += d.example(i)[k];
  }
  for (auto& m : mean) m /= n;
  return mean;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// a complete but desk-instant experiment configuration
ExperimentConfig smoke_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.space.num_cells = 1;
  cfg.space.nodes_per_cell = 3;
  cfg.space.candidate_ops = {"zero", "skip-connect", "separable-conv-3x3"};
  cfg.space.channel_width = 4;
  cfg.space.num_classes = 3;
  cfg.space.input_channels = 1;
  cfg.space.input_height = 4;
  cfg.space.input_width = 4;
  cfg.data.kind = "synthetic";
  cfg.data.per_class = 24;
  cfg.data.eval_per_class = 8;
  cfg.data.separation = 3.0;
  cfg.data.seed = 5;
  cfg.profiles = {{imbalance::ProfileKind::exponential, 0.2, 0}};
  cfg.target_spec.calib_per_class = 4;
  cfg.supernet_schedule.epochs = 3;
  cfg.supernet_schedule.milestones = {2};
  cfg.supernet_schedule.batch_size = 16;
  cfg.adapt_schedule.epochs = 2;
  cfg.adapt_schedule.milestones = {1};
  cfg.adapt_schedule.batch_size = 16;
  cfg.retrain_schedule.epochs = 2;
  cfg.retrain_schedule.milestones = {1};
  cfg.retrain_schedule.batch_size = 16;
  cfg.evo.population = 4;
  cfg.evo.generations = 2;
  cfg.evo.crossover_count = 1;
  cfg.evo.mutation_count = 1;
  cfg.evo.top_k = 2;
  cfg.procedures = {adapt::Procedure::p0, adapt::Procedure::p1};
  cfg.seeds = {1};
  cfg.out_dir = out_dir;
  return cfg;
}

}  // namespace

TEST_CASE("synth_dataset is deterministic with separated clusters") {
  SynthSpec spec;
  spec.classes = 4;
  spec.per_class = 30;
  spec.channels = 1;
  spec.height = 4;
  spec.width = 4;
  spec.separation = 6.0;
  spec.seed = 17;

  auto a = synth_dataset(spec);
  auto b = synth_dataset(spec);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.size() == 120);
  CHECK(a.num_classes == 4);
  CHECK(a.feature_dims() == 16);
  CHECK(imbalance::class_counts(a) == std::vector<int>{30, 30, 30, 30});

  // cluster centers land about `separation` apart
  for (int c = 1; c < 4; ++c) {
    double d = dist(class_mean(a, 0), class_mean(a, c));
    CHECK(d > 0.5 * spec.separation);
    CHECK(d < 2.0 * spec.separation);
  }

  spec.seed = 18;
  auto c = synth_dataset(spec);
  CHECK(a.features != c.features);

  spec.separation = 0.0;
  auto flat = synth_dataset(spec);
  // centers coincide, so only sampling noise separates the empirical means
  CHECK(dist(class_mean(flat, 0), class_mean(flat, 1)) < 2.0);
}

TEST_CASE("synth_dataset validates its spec") {
  SynthSpec spec;
  spec.classes = 1;
  CHECK_THROWS_AS(synth_dataset(spec), std::invalid_argument);
  spec.classes = 2;
  spec.per_class = 0;
  CHECK_THROWS_AS(synth_dataset(spec), std::invalid_argument);
}

TEST_CASE("image ingestion reads records and normalizes channels") {
  const std::string path = "/tmp/ltnas_test_cifar.bin";
  auto bytes = make_cifar_records(4, 3, 9);
  write_bytes(path, bytes);

  auto data = ingest_image_dataset(path, 3);
  CHECK(data.size() == 4);
  CHECK(data.num_classes == 3);
  CHECK(data.channels == 3);
  CHECK(data.height == 32);
  CHECK(data.width == 32);
  CHECK(data.labels == std::vector<int>{0, 1, 2, 0});
  REQUIRE(data.channel_mean.size() == 3u);
  REQUIRE(data.channel_std.size() == 3u);

  // normalized channels have near-zero mean over the whole file
  for (int ch = 0; ch < 3; ++ch) {
    double total = 0.0;
    int count = 0;
    for (int i = 0; i < data.size(); ++i) {
      const double* px = data.example(i) + ch * 32 * 32;
      for (int p = 0; p < 32 * 32; ++p, ++count) total += px[p];
    }
    CHECK(std::abs(total / count) < 1e-9);
  }
  fs::remove(path);
}

TEST_CASE("image ingestion rejects malformed files with positions") {
  const std::string path = "/tmp/ltnas_test_cifar_bad.bin";
  auto good = make_cifar_records(3, 3, 10);

  auto truncated = good;
  truncated.resize(truncated.size() - 100);
  write_bytes(path, truncated);
  CHECK_THROWS_WITH_AS(ingest_image_dataset(path, 3),
                       doctest::Contains("remainder"), std::runtime_error);

  auto bad_label = good;
  bad_label[2 * 3073] = 250;
  write_bytes(path, bad_label);
  CHECK_THROWS_WITH_AS(ingest_image_dataset(path, 3),
                       doctest::Contains("byte offset 6146"),
                       std::runtime_error);

  write_bytes(path, {});
  CHECK_THROWS_AS(ingest_image_dataset(path, 3), std::runtime_error);

  CHECK_THROWS_AS(ingest_image_dataset("/tmp/ltnas_no_such_file.bin", 3),
                  std::runtime_error);
  fs::remove(path);
}

TEST_CASE("image ingestion survives a fuzz corpus without crashing") {
  const std::string path = "/tmp/ltnas_test_cifar_fuzz.bin";
  Rng rng(31);
  auto good = make_cifar_records(2, 3, 11);
  for (int trial = 0; trial < 40; ++trial) {
    auto corrupt = good;
    switch (trial % 4) {
      case 0:  // truncate somewhere that breaks the record arithmetic
        corrupt.resize(1 + rng.uniform_int(0, 3072));
        break;
      case 1:  // out-of-range label byte
        corrupt[3073 * rng.uniform_int(0, 1)] =
            static_cast<uint8_t>(rng.uniform_int(3, 255));
        break;
      case 2:  // arbitrary garbage of non-record size
        corrupt.assign(rng.uniform_int(1, 5000), 0xAB);
        if (corrupt.size() % 3073 == 0) corrupt.push_back(0);
        break;
      case 3:  // empty file
        corrupt.clear();
        break;
    }
    write_bytes(path, corrupt);
    CHECK_THROWS_AS(ingest_image_dataset(path, 3), std::exception);
  }
  fs::remove(path);
}

TEST_CASE("export then re-ingest reproduces the original bytes") {
  const std::string in_path = "/tmp/ltnas_test_cifar_rt_in.bin";
  const std::string out_path = "/tmp/ltnas_test_cifar_rt_out.bin";
  auto bytes = make_cifar_records(5, 4, 12);
  write_bytes(in_path, bytes);

  auto data = ingest_image_dataset(in_path, 4);
  export_image_dataset(data, out_path);
  CHECK(read_bytes(out_path) == bytes);

  // geometry or missing constants are rejected
  imbalance::LabeledDataset wrong;
  wrong.num_classes = 2;
  wrong.channels = 1;
  wrong.height = 8;
  wrong.width = 8;
  wrong.features.assign(64, 0.0);
  wrong.labels = {0};
  CHECK_THROWS_AS(export_image_dataset(wrong, out_path),
                  std::invalid_argument);
  fs::remove(in_path);
  fs::remove(out_path);
}

TEST_CASE("split index files round trip") {
  const std::string path = "/tmp/ltnas_test_split.idx";
  imbalance::LongTailProfile profile{imbalance::ProfileKind::step, 0.05, 512};
  std::vector<size_t> indices = {0, 5, 17, 3, 999};
  write_split_index(path, profile, 42, indices);
  auto back = read_split_index(path);
  CHECK(back == indices);

  std::ofstream(path) << "not a split index\n";
  CHECK_THROWS_AS(read_split_index(path), std::runtime_error);
  CHECK_THROWS_AS(read_split_index("/tmp/ltnas_no_such.idx"),
                  std::runtime_error);
  fs::remove(path);
}

TEST_CASE("rank correlation reference values") {
  auto [rho1, tau1] = rank_correlation({1, 2, 3, 4}, {10, 20, 30, 40});
  CHECK(rho1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tau1 == doctest::Approx(1.0).epsilon(1e-12));

  auto [rho2, tau2] = rank_correlation({1, 2, 3, 4}, {4, 3, 2, 1});
  CHECK(rho2 == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(tau2 == doctest::Approx(-1.0).epsilon(1e-12));

  auto [rho3, tau3] = rank_correlation({1, 2, 3, 4}, {1, 2, 4, 3});
  CHECK(tau3 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(rho3 == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("rank correlation handles ties by averaging and tau-b correction") {
  auto [rho, tau] = rank_correlation({1, 1, 2}, {1, 2, 3});
  CHECK(rho == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
  CHECK(tau == doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-12));
}

TEST_CASE("rank correlation rejects degenerate inputs") {
  CHECK_THROWS_AS(rank_correlation({1}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(rank_correlation({1, 2}, {1, 2, 3}),
                  std::invalid_argument);
  CHECK_THROWS_AS(rank_correlation({2, 2, 2}, {1, 2, 3}),
                  std::invalid_argument);
  CHECK_THROWS_AS(rank_correlation({1, 2, 3}, {5, 5, 5}),
                  std::invalid_argument);
}

TEST_CASE("paired comparison computes the t statistic") {
  auto cmp = paired_comparison({2, 3, 4}, {1, 1, 5});
  CHECK(cmp.n == 3);
  CHECK(cmp.mean_diff == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(cmp.sd_diff == doctest::Approx(std::sqrt(7.0 / 3.0)).epsilon(1e-12));
  CHECK(cmp.t_stat == doctest::Approx(2.0 / std::sqrt(7.0)).epsilon(1e-12));
  CHECK_FALSE(cmp.degenerate);

  auto same = paired_comparison({1, 2, 3}, {1, 2, 3});
  CHECK(same.degenerate);
  CHECK(same.t_stat == 0.0);
  CHECK(same.mean_diff == 0.0);

  CHECK_THROWS_AS(paired_comparison({1}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(paired_comparison({1, 2}, {1}), std::invalid_argument);
}

TEST_CASE("one-sided t critical values match standard tables") {
  CHECK(t_critical_one_sided(4, 0.10) == doctest::Approx(1.533).epsilon(1e-3));
  CHECK(t_critical_one_sided(9, 0.05) == doctest::Approx(1.833).epsilon(1e-3));
  CHECK(t_critical_one_sided(30, 0.01) ==
        doctest::Approx(2.457).epsilon(1e-3));
  // beyond the table, the normal quantile takes over
  CHECK(t_critical_one_sided(500, 0.05) ==
        doctest::Approx(1.645).epsilon(1e-2));
  CHECK_THROWS_AS(t_critical_one_sided(0, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(t_critical_one_sided(5, 0.2), std::invalid_argument);
}

TEST_CASE("significantly_less requires real one-sided evidence") {
  // strongly negative differences
  auto worse = paired_comparison({0.1, 0.12, 0.11, 0.13, 0.1},
                                 {0.5, 0.52, 0.51, 0.53, 0.5});
  CHECK(significantly_less(worse, 0.1));

  // strongly positive differences
  auto better = paired_comparison({0.5, 0.52, 0.51, 0.53, 0.5},
                                  {0.1, 0.12, 0.11, 0.13, 0.1});
  CHECK_FALSE(significantly_less(better, 0.1));

  // all-zero differences carry no evidence
  auto flat = paired_comparison({0.3, 0.3, 0.3}, {0.3, 0.3, 0.3});
  CHECK_FALSE(significantly_less(flat, 0.1));
}

TEST_CASE("experiment config round trips through its json form") {
  auto cfg = smoke_config("/tmp/ltnas_cfg_rt");
  auto text = experiment_config_json(cfg);
  auto back = parse_experiment_config(text);
  CHECK(experiment_config_json(back) == text);
  CHECK(back.space.num_classes == 3);
  CHECK(back.data.kind == "synthetic");
  CHECK(back.profiles.size() == 1u);
  CHECK(back.profiles[0].kind == imbalance::ProfileKind::exponential);
  CHECK(back.profiles[0].factor == 0.2);
  CHECK(back.procedures ==
        std::vector<adapt::Procedure>{adapt::Procedure::p0,
                                      adapt::Procedure::p1});
  CHECK(back.seeds == std::vector<uint64_t>{1});
  CHECK(back.supernet_schedule.epochs == 3);
  CHECK(back.evo.top_k == 2);

  const std::string path = "/tmp/ltnas_test_config.json";
  save_experiment_config(cfg, path);
  auto loaded = load_experiment_config(path);
  CHECK(experiment_config_json(loaded) == text);
  fs::remove(path);
}

TEST_CASE("experiment config rejects unknown keys at any depth") {
  auto cfg = smoke_config("/tmp/x");
  auto text = experiment_config_json(cfg);

  auto inject = [](std::string s, const std::string& after,
                   const std::string& field) {
    auto pos = s.find(after);
    REQUIRE(pos != std::string::npos);
    pos = s.find('{', pos);
    s.insert(pos + 1, field);
    return s;
  };

  // top level
  std::string top = text;
  top.insert(1, "\"bogus\":1,");
  CHECK_THROWS_WITH_AS(parse_experiment_config(top),
                       doctest::Contains("bogus"), std::invalid_argument);

  // nested objects
  CHECK_THROWS_AS(
      parse_experiment_config(inject(text, "\"space\"", "\"typo\":3,")),
      std::invalid_argument);
  CHECK_THROWS_AS(
      parse_experiment_config(inject(text, "\"evo\"", "\"typo\":3,")),
      std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment_config("{"), std::exception);
  CHECK_THROWS_AS(parse_experiment_config("[]"), std::exception);
}

TEST_CASE("run_experiment writes runs, summary, and manifest") {
  const std::string out = "/tmp/ltnas_test_exp";
  fs::remove_all(out);
  auto cfg = smoke_config(out);
  auto result = run_experiment(cfg);

  CHECK(result.failures.empty());
  REQUIRE(result.runs.size() == 2u);  // 2 procedures x 1 profile x 1 seed
  CHECK(result.runs[0].kind == adapt::Procedure::p0);
  CHECK(result.runs[1].kind == adapt::Procedure::p1);
  REQUIRE(result.run_dirs.size() == 2u);
  for (const auto& dir : result.run_dirs) {
    CHECK(fs::exists(fs::path(dir) / "config.json"));
    CHECK(fs::exists(fs::path(dir) / "model.ckpt"));
    CHECK(fs::exists(fs::path(dir) / "summary.csv"));
  }
  CHECK(fs::exists(fs::path(out) / "summary.csv"));
  CHECK(fs::exists(fs::path(out) / "manifest.json"));
  CHECK(fs::exists(fs::path(out) / "config.json"));

  auto manifest = slurp(out + std::string("/manifest.json"));
  CHECK(manifest.find("\"artifact\"") != std::string::npos);
  CHECK(manifest.find("\"failures\"") != std::string::npos);

  // rerun: the summary is byte-identical
  auto first_summary = slurp(out + std::string("/summary.csv"));
  fs::remove_all(out);
  auto again = run_experiment(cfg);
  CHECK(slurp(out + std::string("/summary.csv")) == first_summary);

  CHECK(!first_summary.empty());
  CHECK(first_summary.rfind("procedure,profile,factor,seeds,", 0) == 0);
  fs::remove_all(out);
}

TEST_CASE("emit_report aggregates run directories deterministically") {
  const std::string out = "/tmp/ltnas_test_exp2";
  const std::string rep = "/tmp/ltnas_test_report";
  fs::remove_all(out);
  fs::remove_all(rep);
  auto cfg = smoke_config(out);
  auto result = run_experiment(cfg);
  REQUIRE(result.failures.empty());

  emit_report(result.run_dirs, rep);
  CHECK(fs::exists(fs::path(rep) / "report.csv"));
  CHECK(fs::exists(fs::path(rep) / "fitness_curves.svg"));
  CHECK(fs::exists(fs::path(rep) / "class_counts_exponential_0.2.svg"));

  auto report = slurp(rep + std::string("/report.csv"));
  // one row per procedure plus the header
  CHECK(std::count(report.begin(), report.end(), '\n') == 3);
  CHECK(report.rfind("procedure,", 0) == 0);
  CHECK(report.find("exponential@0.2") != std::string::npos);
  CHECK(report.find("P0,") != std::string::npos);
  CHECK(report.find("P1,") != std::string::npos);

  auto svg1 = slurp(rep + std::string("/fitness_curves.svg"));
  emit_report(result.run_dirs, rep);
  CHECK(slurp(rep + std::string("/fitness_curves.svg")) == svg1);
  CHECK(slurp(rep + std::string("/report.csv")) == report);

  // with a rank report, the scatter appears
  RankReport rank;
  rank.tokens = {"0-0-0", "1-1-1"};
  rank.fitness_balanced = {0.5, 0.7};
  rank.fitness_imbalanced = {0.4, 0.6};
  rank.spearman_rho = 1.0;
  rank.kendall_tau = 1.0;
  emit_report(result.run_dirs, rep, &rank);
  CHECK(fs::exists(fs::path(rep) / "rank_scatter.svg"));

  CHECK_THROWS_AS(emit_report({}, rep), std::invalid_argument);
  fs::remove_all(out);
  fs::remove_all(rep);
}

TEST_CASE("svg emitters are deterministic and well-formed") {
  std::vector<std::vector<double>> series = {{0.1, 0.3, 0.5}, {0.2, 0.2, 0.6}};
  auto a = svg_line_chart(series, {"one", "two"}, "title", "x", "y");
  auto b = svg_line_chart(series, {"one", "two"}, "title", "x", "y");
  CHECK(a == b);
  CHECK(a.rfind("<svg", 0) == 0);
  CHECK(a.find("</svg>") != std::string::npos);
  CHECK(a.find("title") != std::string::npos);

  auto bar = svg_bar_chart({5, 3, 1}, "bars", "class", "count");
  CHECK(bar.rfind("<svg", 0) == 0);
  CHECK(bar.find("</svg>") != std::string::npos);

  auto sc = svg_scatter({0.1, 0.2}, {0.3, 0.4}, "sc", "a", "b", "rho=1");
  CHECK(sc.rfind("<svg", 0) == 0);
  CHECK(sc.find("rho=1") != std::string::npos);
}

TEST_CASE("rank transfer analysis scores every genotype reproducibly") {
  space::SpaceConfig scfg;
  scfg.num_cells = 1;
  scfg.nodes_per_cell = 3;
  scfg.candidate_ops = {"zero", "skip-connect"};
  scfg.channel_width = 4;
  scfg.num_classes = 3;
  scfg.input_channels = 1;
  scfg.input_height = 4;
  scfg.input_width = 4;
  auto space = build_search_space(scfg);

  SynthSpec dspec;
  dspec.classes = 3;
  dspec.per_class = 24;
  dspec.channels = 1;
  dspec.height = 4;
  dspec.width = 4;
  dspec.separation = 2.0;
  dspec.seed = 77;
  auto pool = synth_dataset(dspec);
  dspec.seed = 78;
  auto eval_pool = synth_dataset(dspec);

  adapt::TargetSpec balanced_spec;
  balanced_spec.profile = {imbalance::ProfileKind::balance, 1.0, 24};
  balanced_spec.calib_per_class = 4;
  adapt::TargetSpec tail_spec = balanced_spec;
  tail_spec.profile = {imbalance::ProfileKind::exponential, 0.2, 24};

  Rng rb(101), rt(102);
  auto balanced = adapt::make_target(pool, eval_pool, balanced_spec, rb);
  auto tailed = adapt::make_target(pool, eval_pool, tail_spec, rt);

  supernet::TrainSchedule sched;
  sched.epochs = 2;
  sched.batch_size = 16;
  sched.initial_lr = 0.05;
  imbalance::ReweightPolicy policy;

  auto report =
      rank_transfer_analysis(space, balanced, tailed, sched, policy, 7, 8);
  CHECK(report.tokens.size() == 8u);  // 2^3 genotypes
  CHECK(report.fitness_balanced.size() == 8u);
  CHECK(report.fitness_imbalanced.size() == 8u);
  CHECK(std::isfinite(report.spearman_rho));
  CHECK(std::isfinite(report.kendall_tau));
  CHECK(report.spearman_rho >= -1.0);
  CHECK(report.spearman_rho <= 1.0);
  CHECK(report.kendall_tau >= -1.0);
  CHECK(report.kendall_tau <= 1.0);

  auto again =
      rank_transfer_analysis(space, balanced, tailed, sched, policy, 7, 8);
  CHECK(again.fitness_balanced == report.fitness_balanced);
  CHECK(again.fitness_imbalanced == report.fitness_imbalanced);
  CHECK(again.spearman_rho == report.spearman_rho);

  const std::string path = "/tmp/ltnas_test_rank.json";
  write_rank_report(report, path);
  auto loaded = read_rank_report(path);
  CHECK(loaded.tokens == report.tokens);
  CHECK(loaded.fitness_balanced == report.fitness_balanced);
  CHECK(loaded.fitness_imbalanced == report.fitness_imbalanced);
  CHECK(loaded.spearman_rho == report.spearman_rho);
  CHECK(loaded.kendall_tau == report.kendall_tau);
  fs::remove(path);
}
