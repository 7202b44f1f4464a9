// Command-line front end: config-driven data construction, training,
// search, adaptation, and reporting.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltnas/adapt.hpp"
#include "ltnas/harness.hpp"
#include "ltnas/imbalance.hpp"
#include "ltnas/search.hpp"
#include "ltnas/space.hpp"
#include "ltnas/supernet.hpp"

namespace fs = std::filesystem;
using namespace ltnas;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out;
};

harness::ExperimentConfig load_config(const GlobalArgs& g) {
  if (g.config_path.empty())
    throw std::runtime_error("this command needs --config <file>");
  harness::ExperimentConfig cfg =
      harness::load_experiment_config(g.config_path);
  if (g.seed) cfg.seeds = {*g.seed};
  if (!g.out.empty()) cfg.out_dir = g.out;
  return cfg;
}

adapt::AdaptConfig adapt_config(const harness::ExperimentConfig& cfg,
                                uint64_t seed) {
  adapt::AdaptConfig a;
  a.adapt_schedule = cfg.adapt_schedule;
  a.supernet_schedule = cfg.supernet_schedule;
  a.retrain_schedule = cfg.retrain_schedule;
  a.policy = cfg.policy;
  a.evo = cfg.evo;
  a.retrain_candidates = cfg.retrain_candidates;
  a.seed = seed;
  return a;
}

struct SourceTask {
  imbalance::LabeledDataset train_pool;
  imbalance::LabeledDataset eval_pool;
  adapt::TargetData source;
};

imbalance::LongTailProfile balanced_profile(
    const imbalance::LabeledDataset& pool) {
  std::vector<int> counts = imbalance::class_counts(pool);
  return {imbalance::ProfileKind::balance, 1.0,
          *std::min_element(counts.begin(), counts.end())};
}

SourceTask build_source(const harness::ExperimentConfig& cfg, uint64_t seed) {
  SourceTask task;
  if (cfg.data.kind == "synthetic") {
    harness::SynthSpec spec;
    spec.classes = cfg.space.num_classes;
    spec.per_class = cfg.data.per_class + cfg.data.eval_per_class;
    spec.channels = cfg.space.input_channels;
    spec.height = cfg.space.input_height;
    spec.width = cfg.space.input_width;
    spec.separation = cfg.data.separation;
    spec.seed = cfg.data.seed;
    imbalance::LabeledDataset all = harness::synth_dataset(spec);
    std::vector<size_t> train_idx, eval_idx;
    for (int c = 0; c < spec.classes; ++c) {
      const size_t start = static_cast<size_t>(c) * spec.per_class;
      for (int i = 0; i < cfg.data.per_class; ++i)
        train_idx.push_back(start + i);
      for (int i = cfg.data.per_class; i < spec.per_class; ++i)
        eval_idx.push_back(start + i);
    }
    task.train_pool = imbalance::take(all, train_idx);
    task.eval_pool = imbalance::take(all, eval_idx);
  } else {
    task.train_pool =
        harness::ingest_image_dataset(cfg.data.train_path,
                                      cfg.space.num_classes);
    task.eval_pool = harness::ingest_image_dataset(cfg.data.test_path,
                                                   cfg.space.num_classes);
  }
  adapt::TargetSpec spec = cfg.target_spec;
  spec.profile = balanced_profile(task.train_pool);
  Rng rng = Rng(seed).derive("source-data");
  task.source =
      adapt::make_target(task.train_pool, task.eval_pool, spec, rng);
  return task;
}

adapt::TargetData build_target(const harness::ExperimentConfig& cfg,
                               const SourceTask& task, uint64_t seed,
                               int profile_index) {
  adapt::TargetSpec spec = cfg.target_spec;
  spec.profile = cfg.profiles.at(profile_index);
  if (spec.profile.base_count <= 0)
    spec.profile.base_count = balanced_profile(task.train_pool).base_count;
  Rng rng = Rng(seed).derive("target", profile_index);
  return adapt::make_target(task.train_pool, task.eval_pool, spec, rng);
}

int cmd_build_data(const GlobalArgs& g) {
  harness::ExperimentConfig cfg = load_config(g);
  fs::create_directories(cfg.out_dir);
  const uint64_t seed = cfg.seeds.front();
  SourceTask task = build_source(cfg, seed);
  for (size_t pi = 0; pi < cfg.profiles.size(); ++pi) {
    imbalance::LongTailProfile prof = cfg.profiles[pi];
    if (prof.base_count <= 0)
      prof.base_count = balanced_profile(task.train_pool).base_count;
    imbalance::ClassHistogram hist =
        imbalance::longtail_counts(prof, task.train_pool.num_classes);
    Rng rng = Rng(seed).derive("target", static_cast<int>(pi)).derive("tail");
    std::vector<size_t> indices =
        imbalance::subsample_indices(task.train_pool, hist, rng);
    char name[128];
    std::snprintf(name, sizeof(name), "%s-%g.split",
                  imbalance::profile_kind_name(prof.kind), prof.factor);
    const std::string path = (fs::path(cfg.out_dir) / name).string();
    harness::write_split_index(path, prof, seed, indices);
    std::cout << path << ": " << indices.size() << " examples\n";
  }
  return 0;
}

int cmd_train_supernet(const GlobalArgs& g) {
  harness::ExperimentConfig cfg = load_config(g);
  fs::create_directories(cfg.out_dir);
  const uint64_t seed = cfg.seeds.front();
  SourceTask task = build_source(cfg, seed);
  const space::SearchSpace sp = space::build_search_space(cfg.space);
  adapt::AdaptConfig acfg = adapt_config(cfg, seed);

  Rng root(seed);
  Rng init_rng = root.derive("init");
  supernet::SuperNetwork net = supernet::init_supernet(sp, init_rng);
  imbalance::ReweightPolicy policy = cfg.policy;
  policy.drw_epoch = adapt::drw_epoch_supernet(acfg.supernet_schedule);
  Rng train_rng = root.derive("train");
  supernet::TrainLog log =
      supernet::train_supernet(net, task.source.fit, acfg.supernet_schedule,
                               policy, train_rng, supernet::TrainOptions{});

  const std::string ckpt = (fs::path(cfg.out_dir) / "supernet.ckpt").string();
  supernet::write_file(ckpt, supernet::save_checkpoint(net));
  std::ofstream metrics(fs::path(cfg.out_dir) / "supernet_metrics.csv");
  metrics << "epoch,loss,lr\n";
  metrics.setf(std::ios::fixed);
  metrics.precision(9);
  for (const supernet::EpochMetric& m : log.epochs)
    metrics << m.epoch << ',' << m.loss << ',' << m.lr << '\n';
  std::cout << ckpt << ": " << log.updated_elements
            << " parameter updates over " << log.epochs.size()
            << " epochs\n";
  return 0;
}

int cmd_evo_search(const GlobalArgs& g) {
  harness::ExperimentConfig cfg = load_config(g);
  const uint64_t seed = cfg.seeds.front();
  const std::string ckpt = (fs::path(cfg.out_dir) / "supernet.ckpt").string();
  supernet::SuperNetwork net =
      supernet::load_checkpoint(supernet::read_file(ckpt));
  SourceTask task = build_source(cfg, seed);
  adapt::TargetData target = build_target(cfg, task, seed, 0);

  search::EvoConfig evo = cfg.evo;
  evo.seed = Rng(seed).derive("rank").seed();
  search::EvoResult result =
      search::evolve(net, evo, target.calib, target.val);

  std::ofstream os(fs::path(cfg.out_dir) / "ranking.csv");
  os << "rank,genotype,fitness\n";
  os.setf(std::ios::fixed);
  os.precision(6);
  for (size_t i = 0; i < result.population.size(); ++i)
    os << i << ',' << space::encode_genotype(result.population[i].genotype)
       << ',' << result.population[i].fitness << '\n';
  std::cout << "best " << space::encode_genotype(result.population[0].genotype)
            << " fitness " << result.population[0].fitness << " ("
            << result.evaluations << " evaluations)\n";
  return 0;
}

int cmd_adapt(const GlobalArgs& g, const std::string& procedure) {
  harness::ExperimentConfig cfg = load_config(g);
  const adapt::Procedure proc = adapt::procedure_from_name(procedure);
  fs::create_directories(cfg.out_dir);

  std::vector<adapt::AdaptationRun> runs;
  for (uint64_t seed : cfg.seeds) {
    SourceTask task = build_source(cfg, seed);
    const space::SearchSpace sp = space::build_search_space(cfg.space);
    adapt::AdaptConfig acfg = adapt_config(cfg, seed);
    adapt::SearchPipeline src;
    if (proc != adapt::Procedure::p3)
      src = adapt::run_search_pipeline(sp, task.source.fit, task.source.val,
                                       task.source.calib, acfg);
    for (size_t pi = 0; pi < cfg.profiles.size(); ++pi) {
      adapt::TargetData target =
          build_target(cfg, task, seed, static_cast<int>(pi));
      adapt::AdaptationRun run;
      switch (proc) {
        case adapt::Procedure::p0:
          run = adapt::run_p0(src.net, src.topk, target, acfg);
          break;
        case adapt::Procedure::p1:
          run = adapt::run_p1(src.net, target, acfg);
          break;
        case adapt::Procedure::p2:
          run = adapt::run_p2(src.net, target, acfg);
          break;
        case adapt::Procedure::p3:
          run = adapt::run_p3(sp, target, acfg);
          break;
      }
      char tag[64];
      std::snprintf(tag, sizeof(tag), "%s-%g",
                    imbalance::profile_kind_name(run.profile), run.factor);
      const std::string dir =
          (fs::path(cfg.out_dir) / ("seed" + std::to_string(seed)) / tag /
           adapt::procedure_name(proc))
              .string();
      adapt::write_run_dir(run, acfg, dir);
      std::cout << dir << ": accuracy " << run.accuracy << ", updates "
                << run.updates << '\n';
      runs.push_back(std::move(run));
    }
  }
  if (!runs.empty()) {
    std::ofstream os(fs::path(cfg.out_dir) / "summary.csv");
    os << adapt::comparison_csv(adapt::compare_procedures(runs));
  }
  return 0;
}

int cmd_rank_compare(const GlobalArgs& g, int max_genotypes) {
  harness::ExperimentConfig cfg = load_config(g);
  fs::create_directories(cfg.out_dir);
  const uint64_t seed = cfg.seeds.front();
  SourceTask task = build_source(cfg, seed);
  adapt::TargetData target = build_target(cfg, task, seed, 0);
  const space::SearchSpace sp = space::build_search_space(cfg.space);

  harness::RankReport report = harness::rank_transfer_analysis(
      sp, task.source, target, cfg.retrain_schedule, cfg.policy, seed,
      max_genotypes);
  const std::string path =
      (fs::path(cfg.out_dir) / "rank_report.json").string();
  harness::write_rank_report(report, path);
  std::ofstream os(fs::path(cfg.out_dir) / "rank_scatter.svg");
  char note[128];
  std::snprintf(note, sizeof(note), "spearman=%.4f kendall=%.4f",
                report.spearman_rho, report.kendall_tau);
  os << harness::svg_scatter(report.fitness_balanced,
                             report.fitness_imbalanced,
                             "Balanced vs imbalanced fitness",
                             "balanced accuracy", "imbalanced accuracy", note);
  std::cout << path << ": spearman " << report.spearman_rho << ", kendall "
            << report.kendall_tau << '\n';
  return 0;
}

int cmd_report(const GlobalArgs& g, std::vector<std::string> dirs) {
  if (g.out.empty())
    throw std::runtime_error("report needs --out <dir>");
  if (dirs.empty()) {
    // scan <out>/seed*/<profile>/<procedure> for completed runs
    for (const auto& seed_dir : fs::directory_iterator(g.out)) {
      if (!seed_dir.is_directory()) continue;
      if (seed_dir.path().filename().string().rfind("seed", 0) != 0) continue;
      for (const auto& prof_dir : fs::directory_iterator(seed_dir)) {
        if (!prof_dir.is_directory()) continue;
        for (const auto& run_dir : fs::directory_iterator(prof_dir))
          if (fs::exists(run_dir.path() / "summary.csv"))
            dirs.push_back(run_dir.path().string());
      }
    }
    std::sort(dirs.begin(), dirs.end());
  }
  harness::RankReport rank;
  const harness::RankReport* rank_ptr = nullptr;
  const fs::path rank_path = fs::path(g.out) / "rank_report.json";
  if (fs::exists(rank_path)) {
    rank = harness::read_rank_report(rank_path.string());
    rank_ptr = &rank;
  }
  const std::string report_dir = (fs::path(g.out) / "report").string();
  harness::emit_report(dirs, report_dir, rank_ptr);
  std::cout << report_dir << ": " << dirs.size() << " runs aggregated\n";
  return 0;
}

int cmd_experiment(const GlobalArgs& g) {
  harness::ExperimentConfig cfg = load_config(g);
  if (g.seed) cfg.seeds = {*g.seed};
  harness::ExperimentResult result = harness::run_experiment(cfg);
  std::cout << cfg.out_dir << ": " << result.runs.size() << " runs, "
            << result.failures.size() << " failures\n";
  for (const std::string& f : result.failures) std::cerr << f << '\n';
  if (!result.runs.empty())
    std::cout << adapt::comparison_csv(result.table);
  return result.failures.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"architecture search toolkit for class-imbalanced datasets"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--config", g.config_path, "experiment config file (JSON)");
  uint64_t seed_value = 0;
  CLI::Option* seed_opt =
      app.add_option("--seed", seed_value, "override the config seed list");
  app.add_option("--out", g.out, "override the output directory");

  app.add_subcommand("build-data",
                     "construct long-tailed split index files per profile");
  app.add_subcommand("train-supernet",
                     "train the source super-network and save a checkpoint");
  app.add_subcommand("evo-search",
                     "evolutionary genotype ranking on the first profile");
  CLI::App* adapt_cmd =
      app.add_subcommand("adapt", "run one adaptation procedure");
  std::string procedure;
  adapt_cmd->add_option("--procedure", procedure, "one of p0, p1, p2, p3")
      ->required();
  CLI::App* rank_cmd = app.add_subcommand(
      "rank-compare", "balanced vs imbalanced rank-transfer analysis");
  int max_genotypes = 16;
  rank_cmd->add_option("--max-genotypes", max_genotypes,
                       "architectures to train exhaustively");
  CLI::App* report_cmd =
      app.add_subcommand("report", "aggregate run directories into a report");
  std::vector<std::string> report_dirs;
  report_cmd->add_option("dirs", report_dirs,
                         "run directories (default: scan --out)");
  app.add_subcommand("experiment", "run the full configured pipeline");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed_value;

  try {
    if (app.got_subcommand("build-data")) return cmd_build_data(g);
    if (app.got_subcommand("train-supernet")) return cmd_train_supernet(g);
    if (app.got_subcommand("evo-search")) return cmd_evo_search(g);
    if (app.got_subcommand("adapt")) return cmd_adapt(g, procedure);
    if (app.got_subcommand("rank-compare"))
      return cmd_rank_compare(g, max_genotypes);
    if (app.got_subcommand("report")) return cmd_report(g, report_dirs);
    if (app.got_subcommand("experiment")) return cmd_experiment(g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
