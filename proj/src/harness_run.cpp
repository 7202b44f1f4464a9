#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json_util.hpp"
#include "ltnas/harness.hpp"

namespace fs = std::filesystem;

namespace ltnas::harness {

using imbalance::LabeledDataset;
using imbalance::LongTailProfile;
using nlohmann::json;

// ----------------------------- config -----------------------------

ExperimentConfig::ExperimentConfig()
    : supernet_schedule(supernet::default_supernet_schedule()),
      adapt_schedule(supernet::default_adaptation_schedule()),
      retrain_schedule(supernet::default_subnet_schedule()) {
  profiles.push_back({imbalance::ProfileKind::exponential, 0.01, 0});
  procedures = {adapt::Procedure::p0, adapt::Procedure::p1,
                adapt::Procedure::p2, adapt::Procedure::p3};
  seeds = {1};
}

namespace {

json schedule_json(const supernet::TrainSchedule& s) {
  return {{"epochs", s.epochs},
          {"initial_lr", s.initial_lr},
          {"milestones", s.milestones},
          {"decay_factor", s.decay_factor},
          {"momentum", s.momentum},
          {"weight_decay", s.weight_decay},
          {"batch_size", s.batch_size}};
}

supernet::TrainSchedule schedule_from_json(const json& j,
                                           const supernet::TrainSchedule& base,
                                           const std::string& where) {
  require_keys(j,
               {"epochs", "initial_lr", "milestones", "decay_factor",
                "momentum", "weight_decay", "batch_size"},
               where);
  supernet::TrainSchedule s = base;
  s.epochs = j.value("epochs", s.epochs);
  s.initial_lr = j.value("initial_lr", s.initial_lr);
  if (j.contains("milestones"))
    s.milestones = j.at("milestones").get<std::vector<int>>();
  s.decay_factor = j.value("decay_factor", s.decay_factor);
  s.momentum = j.value("momentum", s.momentum);
  s.weight_decay = j.value("weight_decay", s.weight_decay);
  s.batch_size = j.value("batch_size", s.batch_size);
  return s;
}

}  // namespace

std::string experiment_config_json(const ExperimentConfig& cfg) {
  json j;
  j["space"] = {{"num_cells", cfg.space.num_cells},
                {"nodes_per_cell", cfg.space.nodes_per_cell},
                {"candidate_ops", cfg.space.candidate_ops},
                {"channel_width", cfg.space.channel_width},
                {"num_classes", cfg.space.num_classes},
                {"input_channels", cfg.space.input_channels},
                {"input_height", cfg.space.input_height},
                {"input_width", cfg.space.input_width}};
  if (cfg.data.kind == "synthetic") {
    j["data"] = {{"kind", "synthetic"},
                 {"per_class", cfg.data.per_class},
                 {"eval_per_class", cfg.data.eval_per_class},
                 {"separation", cfg.data.separation},
                 {"seed", cfg.data.seed}};
  } else {
    j["data"] = {{"kind", cfg.data.kind},
                 {"train_path", cfg.data.train_path},
                 {"test_path", cfg.data.test_path}};
  }
  j["profiles"] = json::array();
  for (const LongTailProfile& p : cfg.profiles)
    j["profiles"].push_back({{"kind", imbalance::profile_kind_name(p.kind)},
                             {"factor", p.factor},
                             {"base_count", p.base_count}});
  j["target"] = {{"holdout_fraction", cfg.target_spec.holdout_fraction},
                 {"calib_per_class", cfg.target_spec.calib_per_class},
                 {"min_holdout_per_class",
                  cfg.target_spec.min_holdout_per_class}};
  j["schedules"] = {{"supernet", schedule_json(cfg.supernet_schedule)},
                    {"adaptation", schedule_json(cfg.adapt_schedule)},
                    {"retrain", schedule_json(cfg.retrain_schedule)}};
  j["policy"] = {{"gamma", cfg.policy.gamma},
                 {"lambda", cfg.policy.lambda},
                 {"normalize", cfg.policy.normalize}};
  j["evo"] = {{"population", cfg.evo.population},
              {"generations", cfg.evo.generations},
              {"crossover_count", cfg.evo.crossover_count},
              {"mutation_count", cfg.evo.mutation_count},
              {"mutation_rate", cfg.evo.mutation_rate},
              {"top_k", cfg.evo.top_k}};
  j["retrain_candidates"] = cfg.retrain_candidates;
  j["procedures"] = json::array();
  for (adapt::Procedure p : cfg.procedures)
    j["procedures"].push_back(adapt::procedure_name(p));
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir;
  return j.dump(2) + "\n";
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: not valid JSON: ") +
                                e.what());
  }
  require_keys(j,
               {"space", "data", "profiles", "target", "schedules", "policy",
                "evo", "retrain_candidates", "procedures", "seeds", "out_dir"},
               "config");
  ExperimentConfig cfg;
  if (j.contains("space")) {
    const json& s = j.at("space");
    require_keys(s,
                 {"num_cells", "nodes_per_cell", "candidate_ops",
                  "channel_width", "num_classes", "input_channels",
                  "input_height", "input_width"},
                 "config.space");
    cfg.space.num_cells = s.value("num_cells", cfg.space.num_cells);
    cfg.space.nodes_per_cell =
        s.value("nodes_per_cell", cfg.space.nodes_per_cell);
    if (s.contains("candidate_ops"))
      cfg.space.candidate_ops =
          s.at("candidate_ops").get<std::vector<std::string>>();
    cfg.space.channel_width =
        s.value("channel_width", cfg.space.channel_width);
    cfg.space.num_classes = s.value("num_classes", cfg.space.num_classes);
    cfg.space.input_channels =
        s.value("input_channels", cfg.space.input_channels);
    cfg.space.input_height = s.value("input_height", cfg.space.input_height);
    cfg.space.input_width = s.value("input_width", cfg.space.input_width);
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    const std::string kind = d.value("kind", "synthetic");
    if (kind == "synthetic") {
      require_keys(
          d, {"kind", "per_class", "eval_per_class", "separation", "seed"},
          "config.data");
      cfg.data.kind = kind;
      cfg.data.per_class = d.value("per_class", cfg.data.per_class);
      cfg.data.eval_per_class =
          d.value("eval_per_class", cfg.data.eval_per_class);
      cfg.data.separation = d.value("separation", cfg.data.separation);
      cfg.data.seed = d.value("seed", cfg.data.seed);
    } else if (kind == "cifar") {
      require_keys(d, {"kind", "train_path", "test_path"}, "config.data");
      cfg.data.kind = kind;
      cfg.data.train_path = d.value("train_path", std::string());
      cfg.data.test_path = d.value("test_path", std::string());
    } else {
      throw std::invalid_argument("config.data: unknown kind '" + kind + "'");
    }
  }
  if (j.contains("profiles")) {
    cfg.profiles.clear();
    for (const json& p : j.at("profiles")) {
      require_keys(p, {"kind", "factor", "base_count"}, "config.profiles[]");
      LongTailProfile prof;
      prof.kind =
          imbalance::profile_kind_from_name(p.value("kind", "balance"));
      prof.factor = p.value("factor", 1.0);
      prof.base_count = p.value("base_count", 0);
      cfg.profiles.push_back(prof);
    }
  }
  if (j.contains("target")) {
    const json& t = j.at("target");
    require_keys(
        t, {"holdout_fraction", "calib_per_class", "min_holdout_per_class"},
        "config.target");
    cfg.target_spec.holdout_fraction =
        t.value("holdout_fraction", cfg.target_spec.holdout_fraction);
    cfg.target_spec.calib_per_class =
        t.value("calib_per_class", cfg.target_spec.calib_per_class);
    cfg.target_spec.min_holdout_per_class = t.value(
        "min_holdout_per_class", cfg.target_spec.min_holdout_per_class);
  }
  if (j.contains("schedules")) {
    const json& s = j.at("schedules");
    require_keys(s, {"supernet", "adaptation", "retrain"},
                 "config.schedules");
    if (s.contains("supernet"))
      cfg.supernet_schedule =
          schedule_from_json(s.at("supernet"), cfg.supernet_schedule,
                             "config.schedules.supernet");
    if (s.contains("adaptation"))
      cfg.adapt_schedule = schedule_from_json(
          s.at("adaptation"), cfg.adapt_schedule,
          "config.schedules.adaptation");
    if (s.contains("retrain"))
      cfg.retrain_schedule = schedule_from_json(
          s.at("retrain"), cfg.retrain_schedule, "config.schedules.retrain");
  }
  if (j.contains("policy")) {
    const json& p = j.at("policy");
    require_keys(p, {"gamma", "lambda", "normalize"}, "config.policy");
    cfg.policy.gamma = p.value("gamma", cfg.policy.gamma);
    cfg.policy.lambda = p.value("lambda", cfg.policy.lambda);
    cfg.policy.normalize = p.value("normalize", cfg.policy.normalize);
  }
  if (j.contains("evo")) {
    const json& e = j.at("evo");
    require_keys(e,
                 {"population", "generations", "crossover_count",
                  "mutation_count", "mutation_rate", "top_k"},
                 "config.evo");
    cfg.evo.population = e.value("population", cfg.evo.population);
    cfg.evo.generations = e.value("generations", cfg.evo.generations);
    cfg.evo.crossover_count =
        e.value("crossover_count", cfg.evo.crossover_count);
    cfg.evo.mutation_count = e.value("mutation_count", cfg.evo.mutation_count);
    cfg.evo.mutation_rate = e.value("mutation_rate", cfg.evo.mutation_rate);
    cfg.evo.top_k = e.value("top_k", cfg.evo.top_k);
  }
  cfg.retrain_candidates =
      j.value("retrain_candidates", cfg.retrain_candidates);
  if (j.contains("procedures")) {
    cfg.procedures.clear();
    for (const json& p : j.at("procedures"))
      cfg.procedures.push_back(
          adapt::procedure_from_name(p.get<std::string>()));
  }
  if (j.contains("seeds"))
    cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("load_experiment_config: cannot open '" + path +
                             "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_experiment_config(ss.str());
}

void save_experiment_config(const ExperimentConfig& cfg,
                            const std::string& path) {
  std::ofstream os(path);
  if (!os)
    throw std::runtime_error("save_experiment_config: cannot open '" + path +
                             "'");
  os << experiment_config_json(cfg);
}

// ----------------------------- rank transfer -----------------------------

RankReport rank_transfer_analysis(const space::SearchSpace& sp,
                                  const adapt::TargetData& balanced,
                                  const adapt::TargetData& imbalanced,
                                  const supernet::TrainSchedule& schedule,
                                  const imbalance::ReweightPolicy& policy,
                                  uint64_t seed, int max_genotypes) {
  if (max_genotypes < 2)
    throw std::invalid_argument(
        "rank_transfer_analysis: need at least two genotypes");
  std::vector<space::Genotype> genotypes =
      space::enumerate_genotypes(sp, max_genotypes);

  RankReport report;
  imbalance::ReweightPolicy pol = policy;
  pol.drw_epoch = adapt::drw_epoch_retrain(schedule);
  auto score = [&](const adapt::TargetData& task, const space::Genotype& g,
                   const char* tag, int index) {
    space::SearchSpace task_space = sp;
    task_space.num_classes = task.fit.num_classes;
    Rng r = Rng(seed).derive(tag, index);
    supernet::Subnet sub = supernet::init_subnet(task_space, g, r);
    supernet::train_subnet(sub, task.fit, schedule, pol, r);
    supernet::recalibrate_norm_stats(sub, task.calib);
    return search::top1_accuracy(supernet::logits_over_dataset(sub, task.val),
                                 task.val.labels);
  };
  for (size_t i = 0; i < genotypes.size(); ++i) {
    report.tokens.push_back(space::encode_genotype(genotypes[i]));
    report.fitness_balanced.push_back(
        score(balanced, genotypes[i], "balanced", static_cast<int>(i)));
    report.fitness_imbalanced.push_back(
        score(imbalanced, genotypes[i], "imbalanced", static_cast<int>(i)));
  }
  auto [rho, tau] =
      rank_correlation(report.fitness_balanced, report.fitness_imbalanced);
  report.spearman_rho = rho;
  report.kendall_tau = tau;
  return report;
}

void write_rank_report(const RankReport& report, const std::string& path) {
  json j = {{"tokens", report.tokens},
            {"fitness_balanced", report.fitness_balanced},
            {"fitness_imbalanced", report.fitness_imbalanced},
            {"spearman_rho", report.spearman_rho},
            {"kendall_tau", report.kendall_tau}};
  std::ofstream os(path);
  if (!os)
    throw std::runtime_error("write_rank_report: cannot open '" + path + "'");
  os << j.dump(2) << '\n';
}

RankReport read_rank_report(const std::string& path) {
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("read_rank_report: cannot open '" + path + "'");
  json j = json::parse(is);
  require_keys(j,
               {"tokens", "fitness_balanced", "fitness_imbalanced",
                "spearman_rho", "kendall_tau"},
               "rank report");
  RankReport r;
  r.tokens = j.at("tokens").get<std::vector<std::string>>();
  r.fitness_balanced =
      j.at("fitness_balanced").get<std::vector<double>>();
  r.fitness_imbalanced =
      j.at("fitness_imbalanced").get<std::vector<double>>();
  r.spearman_rho = j.at("spearman_rho").get<double>();
  r.kendall_tau = j.at("kendall_tau").get<double>();
  if (r.tokens.size() != r.fitness_balanced.size() ||
      r.tokens.size() != r.fitness_imbalanced.size())
    throw std::runtime_error("rank report: misaligned token/score lists");
  return r;
}

// ----------------------------- experiments -----------------------------

namespace {

struct Pools {
  LabeledDataset train;
  LabeledDataset eval;
};

Pools build_pools(const ExperimentConfig& cfg) {
  Pools pools;
  if (cfg.data.kind == "synthetic") {
    SynthSpec spec;
    spec.classes = cfg.space.num_classes;
    spec.per_class = cfg.data.per_class + cfg.data.eval_per_class;
    spec.channels = cfg.space.input_channels;
    spec.height = cfg.space.input_height;
    spec.width = cfg.space.input_width;
    spec.separation = cfg.data.separation;
    spec.seed = cfg.data.seed;
    LabeledDataset all = synth_dataset(spec);
    std::vector<size_t> train_idx, eval_idx;
    for (int c = 0; c < spec.classes; ++c) {
      const size_t start = static_cast<size_t>(c) * spec.per_class;
      for (int i = 0; i < cfg.data.per_class; ++i)
        train_idx.push_back(start + i);
      for (int i = cfg.data.per_class; i < spec.per_class; ++i)
        eval_idx.push_back(start + i);
    }
    pools.train = imbalance::take(all, train_idx);
    pools.eval = imbalance::take(all, eval_idx);
  } else if (cfg.data.kind == "cifar") {
    pools.train =
        ingest_image_dataset(cfg.data.train_path, cfg.space.num_classes);
    pools.eval =
        ingest_image_dataset(cfg.data.test_path, cfg.space.num_classes);
  } else {
    throw std::invalid_argument("run_experiment: unknown data kind '" +
                                cfg.data.kind + "'");
  }
  if (pools.train.channels != cfg.space.input_channels ||
      pools.train.height != cfg.space.input_height ||
      pools.train.width != cfg.space.input_width)
    throw std::invalid_argument(
        "run_experiment: dataset geometry does not match the space input");
  return pools;
}

LongTailProfile resolved_profile(const LongTailProfile& p,
                                 const LabeledDataset& pool) {
  LongTailProfile out = p;
  if (out.base_count <= 0) {
    std::vector<int> counts = imbalance::class_counts(pool);
    out.base_count = *std::min_element(counts.begin(), counts.end());
  }
  return out;
}

std::string profile_tag(const LongTailProfile& p) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s-%g",
                imbalance::profile_kind_name(p.kind), p.factor);
  return buf;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty())
    throw std::invalid_argument("run_experiment: no seeds configured");
  if (cfg.procedures.empty())
    throw std::invalid_argument("run_experiment: no procedures configured");
  if (cfg.profiles.empty())
    throw std::invalid_argument("run_experiment: no profiles configured");

  fs::create_directories(cfg.out_dir);
  save_experiment_config(cfg, (fs::path(cfg.out_dir) / "config.json").string());

  ExperimentResult result;
  Pools pools = build_pools(cfg);
  const space::SearchSpace sp = space::build_search_space(cfg.space);

  json manifest;
  manifest["artifact"] = "ltnas";
  manifest["version"] = "1.0.0";
  manifest["config"] = json::parse(experiment_config_json(cfg));
  manifest["seeds"] = cfg.seeds;
  manifest["evaluation_protocol"] =
      "final accuracies are measured on the balanced evaluation split";
  if (!pools.train.channel_mean.empty())
    manifest["normalization"] = {{"channel_mean", pools.train.channel_mean},
                                 {"channel_std", pools.train.channel_std}};
  manifest["runs"] = json::array();

  for (uint64_t seed : cfg.seeds) {
    adapt::AdaptConfig acfg;
    acfg.adapt_schedule = cfg.adapt_schedule;
    acfg.supernet_schedule = cfg.supernet_schedule;
    acfg.retrain_schedule = cfg.retrain_schedule;
    acfg.policy = cfg.policy;
    acfg.evo = cfg.evo;
    acfg.retrain_candidates = cfg.retrain_candidates;
    acfg.seed = seed;

    // balanced source task and its trained, ranked super-network
    adapt::TargetSpec source_spec = cfg.target_spec;
    source_spec.profile =
        resolved_profile({imbalance::ProfileKind::balance, 1.0, 0},
                         pools.train);
    Rng source_rng = Rng(seed).derive("source-data");
    adapt::TargetData source =
        adapt::make_target(pools.train, pools.eval, source_spec, source_rng);
    adapt::SearchPipeline src;
    try {
      src = adapt::run_search_pipeline(sp, source.fit, source.val,
                                       source.calib, acfg);
    } catch (const std::exception& e) {
      result.failures.push_back("seed " + std::to_string(seed) +
                                " source pipeline: " + e.what());
      manifest["runs"].push_back({{"seed", seed},
                                  {"phase", "source"},
                                  {"status", "failed"},
                                  {"error", e.what()}});
      continue;
    }

    for (size_t pi = 0; pi < cfg.profiles.size(); ++pi) {
      adapt::TargetSpec tspec = cfg.target_spec;
      tspec.profile = resolved_profile(cfg.profiles[pi], pools.train);
      Rng target_rng = Rng(seed).derive("target", static_cast<int>(pi));
      adapt::TargetData target =
          adapt::make_target(pools.train, pools.eval, tspec, target_rng);

      for (adapt::Procedure proc : cfg.procedures) {
        const std::string dir =
            (fs::path(cfg.out_dir) / ("seed" + std::to_string(seed)) /
             profile_tag(tspec.profile) / adapt::procedure_name(proc))
                .string();
        try {
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
          adapt::write_run_dir(run, acfg, dir);
          result.runs.push_back(std::move(run));
          result.run_dirs.push_back(dir);
          manifest["runs"].push_back({{"seed", seed},
                                      {"profile", profile_tag(tspec.profile)},
                                      {"procedure",
                                       adapt::procedure_name(proc)},
                                      {"dir", dir},
                                      {"status", "ok"}});
        } catch (const std::exception& e) {
          result.failures.push_back(std::string(adapt::procedure_name(proc)) +
                                    " seed " + std::to_string(seed) + " " +
                                    profile_tag(tspec.profile) + ": " +
                                    e.what());
          manifest["runs"].push_back({{"seed", seed},
                                      {"profile", profile_tag(tspec.profile)},
                                      {"procedure",
                                       adapt::procedure_name(proc)},
                                      {"dir", dir},
                                      {"status", "failed"},
                                      {"error", e.what()}});
        }
      }
    }
  }

  manifest["failures"] = result.failures;
  if (!result.runs.empty()) {
    result.table = adapt::compare_procedures(result.runs);
    std::ofstream os(fs::path(cfg.out_dir) / "summary.csv");
    os << adapt::comparison_csv(result.table);
  }
  {
    std::ofstream os(fs::path(cfg.out_dir) / "manifest.json");
    os << manifest.dump(2) << '\n';
  }
  return result;
}

// ----------------------------- report -----------------------------

namespace {

struct RunRecord {
  std::string dir;
  std::string procedure;
  std::string profile;
  double factor = 0.0;
  double accuracy = 0.0;
  double updates = 0.0;
  bool has_curve = false;
  std::vector<double> curve;
  std::vector<int> class_counts;
};

RunRecord read_run_dir(const std::string& dir) {
  RunRecord rec;
  rec.dir = dir;
  std::ifstream is(fs::path(dir) / "summary.csv");
  if (!is)
    throw std::runtime_error("emit_report: no summary.csv under '" + dir +
                             "'");
  std::string header, line;
  if (!std::getline(is, header) || !std::getline(is, line))
    throw std::runtime_error("emit_report: malformed summary in '" + dir +
                             "'");
  std::stringstream ss(line);
  std::string field;
  std::vector<std::string> fields;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (fields.size() != 6)
    throw std::runtime_error("emit_report: malformed summary line in '" +
                             dir + "'");
  rec.procedure = fields[0];
  rec.profile = fields[1];
  rec.factor = std::stod(fields[2]);
  rec.accuracy = std::stod(fields[3]);
  rec.updates = std::stod(fields[4]);

  std::ifstream search(fs::path(dir) / "search.csv");
  if (search) {
    std::string sline;
    std::getline(search, sline);  // header
    while (std::getline(search, sline)) {
      const size_t comma = sline.find(',');
      if (comma == std::string::npos) continue;
      rec.curve.push_back(std::stod(sline.substr(comma + 1)));
    }
    rec.has_curve = !rec.curve.empty();
  }
  std::ifstream counts(fs::path(dir) / "class_counts.csv");
  if (counts) {
    std::string cline;
    std::getline(counts, cline);  // header
    while (std::getline(counts, cline)) {
      const size_t comma = cline.find(',');
      if (comma == std::string::npos) continue;
      rec.class_counts.push_back(std::stoi(cline.substr(comma + 1)));
    }
  }
  return rec;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

}  // namespace

void emit_report(const std::vector<std::string>& run_dirs,
                 const std::string& out_dir, const RankReport* rank) {
  if (run_dirs.empty())
    throw std::invalid_argument("emit_report: no run directories given");
  std::vector<RunRecord> recs;
  recs.reserve(run_dirs.size());
  for (const std::string& dir : run_dirs) recs.push_back(read_run_dir(dir));
  fs::create_directories(out_dir);

  // column order: profiles by first appearance; row order: P0..P3
  std::vector<std::string> columns;
  for (const RunRecord& r : recs) {
    const std::string col = r.profile + "@" + fmt("%g", r.factor);
    if (std::find(columns.begin(), columns.end(), col) == columns.end())
      columns.push_back(col);
  }
  const std::vector<std::string> procs = {"P0", "P1", "P2", "P3"};
  {
    std::ofstream os(fs::path(out_dir) / "report.csv");
    os << "procedure";
    for (const std::string& c : columns) os << ',' << c;
    os << '\n';
    for (const std::string& proc : procs) {
      bool any = false;
      for (const RunRecord& r : recs)
        if (r.procedure == proc) any = true;
      if (!any) continue;
      os << proc;
      for (const std::string& col : columns) {
        std::vector<double> accs;
        for (const RunRecord& r : recs)
          if (r.procedure == proc &&
              r.profile + "@" + fmt("%g", r.factor) == col)
            accs.push_back(r.accuracy);
        if (accs.empty()) {
          os << ",";
          continue;
        }
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= accs.size();
        double sd = 0.0;
        if (accs.size() > 1) {
          for (double a : accs) sd += (a - mean) * (a - mean);
          sd = std::sqrt(sd / (accs.size() - 1));
        }
        os << ',' << fmt("%.6f", mean) << "+-" << fmt("%.6f", sd);
      }
      os << '\n';
    }
  }

  // per-generation best-fitness curves
  std::vector<std::vector<double>> series;
  std::vector<std::string> names;
  for (const RunRecord& r : recs)
    if (r.has_curve) {
      series.push_back(r.curve);
      names.push_back(r.procedure + " " + r.profile + "@" +
                      fmt("%g", r.factor));
    }
  if (!series.empty()) {
    std::ofstream os(fs::path(out_dir) / "fitness_curves.svg");
    os << svg_line_chart(series, names, "Best fitness per generation",
                         "generation", "validation accuracy");
  }

  // class-count histogram per distinct profile
  std::vector<std::string> seen;
  for (const RunRecord& r : recs) {
    if (r.class_counts.empty()) continue;
    const std::string col = r.profile + "@" + fmt("%g", r.factor);
    if (std::find(seen.begin(), seen.end(), col) != seen.end()) continue;
    seen.push_back(col);
    std::vector<double> values(r.class_counts.begin(), r.class_counts.end());
    std::ofstream os(fs::path(out_dir) /
                     ("class_counts_" + r.profile + "_" +
                      fmt("%g", r.factor) + ".svg"));
    os << svg_bar_chart(values, "Class counts, " + col, "class",
                        "examples");
  }

  if (rank) {
    std::ofstream os(fs::path(out_dir) / "rank_scatter.svg");
    os << svg_scatter(rank->fitness_balanced, rank->fitness_imbalanced,
                      "Balanced vs imbalanced fitness", "balanced accuracy",
                      "imbalanced accuracy",
                      "spearman=" + fmt("%.4f", rank->spearman_rho) +
                          " kendall=" + fmt("%.4f", rank->kendall_tau));
  }
}

// ----------------------------- plotting -----------------------------

namespace {

constexpr double kWidth = 680.0;
constexpr double kHeight = 460.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 640.0;
constexpr double kTop = 50.0;
constexpr double kBottom = 400.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

void svg_open(std::ostringstream& os, const std::string& title,
              const std::string& x_label, const std::string& y_label) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
     << kHeight << "\">\n";
  os << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << (kLeft + kRight) / 2
     << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"16\">"
     << title << "</text>\n";
  os << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kHeight - 14
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"12\">"
     << x_label << "</text>\n";
  os << "<text x=\"18\" y=\"" << (kTop + kBottom) / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"12\" transform=\"rotate(-90 18 "
     << (kTop + kBottom) / 2 << ")\">" << y_label << "</text>\n";
  // axes
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight
     << "\" y2=\"" << kBottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
     << "\" y2=\"" << kBottom << "\" stroke=\"black\"/>\n";
}

struct Range {
  double lo = 0.0, hi = 1.0;

  double place(double v, double a, double b) const {
    return a + (v - lo) / (hi - lo) * (b - a);
  }
};

Range padded(double lo, double hi) {
  if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

void y_ticks(std::ostringstream& os, const Range& ry) {
  for (int t = 0; t <= 4; ++t) {
    const double v = ry.lo + (ry.hi - ry.lo) * t / 4.0;
    const double y = ry.place(v, kBottom, kTop);
    os << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << coord(y) << "\" x2=\""
       << kLeft << "\" y2=\"" << coord(y) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << coord(y + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
          "font-size=\"11\">"
       << tick_label(v) << "</text>\n";
  }
}

}  // namespace

std::string svg_line_chart(const std::vector<std::vector<double>>& series,
                           const std::vector<std::string>& names,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label) {
  if (series.empty())
    throw std::invalid_argument("svg_line_chart: no series");
  size_t max_len = 0;
  double lo = series[0][0], hi = series[0][0];
  for (const auto& s : series) {
    if (s.empty()) throw std::invalid_argument("svg_line_chart: empty series");
    max_len = std::max(max_len, s.size());
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const Range ry = padded(lo, hi);
  const double xmax = max_len > 1 ? static_cast<double>(max_len - 1) : 1.0;

  std::ostringstream os;
  svg_open(os, title, x_label, y_label);
  y_ticks(os, ry);
  const int xticks = std::min<size_t>(max_len, 8);
  for (int t = 0; t < xticks; ++t) {
    const double gv = xmax * t / std::max(1, xticks - 1);
    const double x = kLeft + gv / xmax * (kRight - kLeft);
    os << "<line x1=\"" << coord(x) << "\" y1=\"" << kBottom << "\" x2=\""
       << coord(x) << "\" y2=\"" << kBottom + 4 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << coord(x) << "\" y=\"" << kBottom + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"11\">"
       << tick_label(std::floor(gv)) << "</text>\n";
  }
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    os << "<polyline fill=\"none\" stroke=\""
       << kPalette[si % kPaletteSize] << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.size(); ++i) {
      const double x = s.size() > 1
                           ? kLeft + (kRight - kLeft) * i / (s.size() - 1)
                           : (kLeft + kRight) / 2;
      os << coord(x) << ',' << coord(ry.place(s[i], kBottom, kTop)) << ' ';
    }
    os << "\"/>\n";
    if (si < names.size()) {
      const double ly = kTop + 16.0 * si;
      os << "<rect x=\"" << kRight - 180 << "\" y=\"" << coord(ly - 9)
         << "\" width=\"10\" height=\"10\" fill=\""
         << kPalette[si % kPaletteSize] << "\"/>\n";
      os << "<text x=\"" << kRight - 165 << "\" y=\"" << coord(ly)
         << "\" font-family=\"sans-serif\" font-size=\"11\">" << names[si]
         << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_bar_chart(const std::vector<double>& values,
                          const std::string& title, const std::string& x_label,
                          const std::string& y_label) {
  if (values.empty()) throw std::invalid_argument("svg_bar_chart: no values");
  double hi = values[0];
  for (double v : values) hi = std::max(hi, v);
  const Range ry = padded(0.0, hi);

  std::ostringstream os;
  svg_open(os, title, x_label, y_label);
  y_ticks(os, ry);
  const double slot = (kRight - kLeft) / values.size();
  for (size_t i = 0; i < values.size(); ++i) {
    const double x = kLeft + slot * i + slot * 0.125;
    const double y = ry.place(values[i], kBottom, kTop);
    os << "<rect x=\"" << coord(x) << "\" y=\"" << coord(y) << "\" width=\""
       << coord(slot * 0.75) << "\" height=\"" << coord(kBottom - y)
       << "\" fill=\"#1f77b4\"/>\n";
    os << "<text x=\"" << coord(x + slot * 0.375) << "\" y=\"" << kBottom + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"11\">"
       << i << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_scatter(const std::vector<double>& x,
                        const std::vector<double>& y, const std::string& title,
                        const std::string& x_label, const std::string& y_label,
                        const std::string& annotation) {
  if (x.empty() || x.size() != y.size())
    throw std::invalid_argument("svg_scatter: bad point lists");
  double xlo = x[0], xhi = x[0], ylo = y[0], yhi = y[0];
  for (size_t i = 0; i < x.size(); ++i) {
    xlo = std::min(xlo, x[i]);
    xhi = std::max(xhi, x[i]);
    ylo = std::min(ylo, y[i]);
    yhi = std::max(yhi, y[i]);
  }
  const Range rx = padded(xlo, xhi);
  const Range ry = padded(ylo, yhi);

  std::ostringstream os;
  svg_open(os, title, x_label, y_label);
  y_ticks(os, ry);
  for (int t = 0; t <= 4; ++t) {
    const double v = rx.lo + (rx.hi - rx.lo) * t / 4.0;
    const double px = rx.place(v, kLeft, kRight);
    os << "<line x1=\"" << coord(px) << "\" y1=\"" << kBottom << "\" x2=\""
       << coord(px) << "\" y2=\"" << kBottom + 4 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << coord(px) << "\" y=\"" << kBottom + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"11\">"
       << tick_label(v) << "</text>\n";
  }
  for (size_t i = 0; i < x.size(); ++i)
    os << "<circle cx=\"" << coord(rx.place(x[i], kLeft, kRight)) << "\" cy=\""
       << coord(ry.place(y[i], kBottom, kTop))
       << "\" r=\"3.5\" fill=\"#1f77b4\" fill-opacity=\"0.8\"/>\n";
  os << "<text x=\"" << kLeft + 10 << "\" y=\"" << kTop + 14
     << "\" font-family=\"sans-serif\" font-size=\"12\">" << annotation
     << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace ltnas::harness
