#include "ltnas/adapt.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json_util.hpp"

namespace ltnas::adapt {

using imbalance::LabeledDataset;
using imbalance::ReweightPolicy;
using search::EvoResult;
using space::Genotype;
using space::SearchSpace;
using supernet::Subnet;
using supernet::SuperNetwork;
using supernet::TrainOptions;
using supernet::TrainSchedule;

const char* procedure_name(Procedure p) {
  switch (p) {
    case Procedure::p0: return "P0";
    case Procedure::p1: return "P1";
    case Procedure::p2: return "P2";
    case Procedure::p3: return "P3";
  }
  throw std::invalid_argument("procedure_name: bad enum value");
}

Procedure procedure_from_name(const std::string& name) {
  std::string n = name;
  for (char& c : n) c = static_cast<char>(std::toupper(c));
  if (n == "P0") return Procedure::p0;
  if (n == "P1") return Procedure::p1;
  if (n == "P2") return Procedure::p2;
  if (n == "P3") return Procedure::p3;
  throw std::invalid_argument("unknown procedure '" + name + "'");
}

uint64_t dataset_identity(const LabeledDataset& data) {
  uint64_t h = fnv1a64(data.features.data(),
                       data.features.size() * sizeof(double));
  std::vector<int32_t> labels(data.labels.begin(), data.labels.end());
  h ^= fnv1a64(labels.data(), labels.size() * sizeof(int32_t));
  return h;
}

TargetData make_target(const LabeledDataset& train_pool,
                       const LabeledDataset& eval_pool, const TargetSpec& spec,
                       Rng& rng) {
  if (train_pool.num_classes != eval_pool.num_classes)
    throw std::invalid_argument(
        "make_target: train and eval pools disagree on class count");
  TargetData t;
  t.profile = spec.profile.kind;
  t.factor = spec.profile.factor;
  t.base_id = dataset_identity(train_pool);

  Rng tail_rng = rng.derive("tail");
  imbalance::ClassHistogram hist =
      imbalance::longtail_counts(spec.profile, train_pool.num_classes);
  LabeledDataset tailed = imbalance::subsample(train_pool, hist, tail_rng);

  Rng split_rng = rng.derive("holdout");
  auto [fit, val] = imbalance::stratified_holdout(
      tailed, spec.holdout_fraction, spec.min_holdout_per_class, split_rng);
  t.fit = std::move(fit);
  t.val = std::move(val);

  Rng calib_rng = rng.derive("calib");
  t.calib = imbalance::stratified_sample(t.fit, spec.calib_per_class,
                                         calib_rng);
  t.eval = eval_pool;
  t.id = dataset_identity(t.fit);
  return t;
}

AdaptConfig::AdaptConfig()
    : adapt_schedule(supernet::default_adaptation_schedule()),
      supernet_schedule(supernet::default_supernet_schedule()),
      retrain_schedule(supernet::default_subnet_schedule()) {}

int drw_epoch_supernet(const TrainSchedule& s) { return s.epochs * 7 / 10; }

int drw_epoch_finetune(const TrainSchedule& s) { return s.epochs / 2; }

int drw_epoch_retrain(const TrainSchedule& s) {
  return s.milestones.empty() ? s.epochs / 2 : s.milestones.front();
}

namespace {

SearchSpace space_for_target(const SearchSpace& base,
                             const LabeledDataset& fit) {
  SearchSpace s = base;
  s.num_classes = fit.num_classes;
  return s;
}

search::EvoConfig evo_for_run(const AdaptConfig& cfg, uint64_t run_seed) {
  search::EvoConfig e = cfg.evo;
  e.seed = Rng(run_seed).derive("rank").seed();
  return e;
}

// Retrains each candidate from scratch on the target, selects by validation
// accuracy (ties to the earlier candidate), and fills the run's final model
// and accuracy fields.
void retrain_and_select(const std::vector<Genotype>& candidates,
                        const SearchSpace& target_space,
                        const TargetData& target, const AdaptConfig& cfg,
                        AdaptationRun& run) {
  if (candidates.empty())
    throw std::invalid_argument("retrain_and_select: no candidate genotypes");
  ReweightPolicy policy = cfg.policy;
  policy.drw_epoch = drw_epoch_retrain(cfg.retrain_schedule);

  bool have_best = false;
  double best_val = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    Rng r = Rng(cfg.seed).derive("retrain", static_cast<int>(i));
    Subnet sub = supernet::init_subnet(target_space, candidates[i], r);
    supernet::TrainLog log =
        supernet::train_subnet(sub, target.fit, cfg.retrain_schedule, policy,
                               r);
    run.updates += log.updated_elements;
    supernet::recalibrate_norm_stats(sub, target.calib);
    const double val_acc = search::top1_accuracy(
        supernet::logits_over_dataset(sub, target.val), target.val.labels);
    if (!have_best || val_acc > best_val) {
      have_best = true;
      best_val = val_acc;
      run.chosen = candidates[i];
      run.best_subnet = std::move(sub);
      run.retrain_epochs = std::move(log.epochs);
    }
  }
  run.val_accuracy = best_val;
  run.accuracy = search::top1_accuracy(
      supernet::logits_over_dataset(run.best_subnet, target.eval),
      target.eval.labels);
}

void stamp_target(AdaptationRun& run, const TargetData& target,
                  const AdaptConfig& cfg) {
  run.seed = cfg.seed;
  run.profile = target.profile;
  run.factor = target.factor;
  run.target_id = target.id;
  run.target_base_id = target.base_id;
  run.target_counts = imbalance::class_counts(target.fit);
}

void keep_search_curve(AdaptationRun& run, const EvoResult& result) {
  run.search_curve.reserve(result.best_per_generation.size());
  for (const search::ScoredGenotype& sg : result.best_per_generation)
    run.search_curve.push_back(sg.fitness);
}

std::vector<Genotype> top_genotypes(const EvoResult& result, int k) {
  std::vector<Genotype> out;
  const int n = std::min<int>(k, static_cast<int>(result.population.size()));
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(result.population[i].genotype);
  return out;
}

void keep_ranking_slice(AdaptationRun& run, const EvoResult& result, int k) {
  const int n = std::min<int>(k, static_cast<int>(result.population.size()));
  run.ranking.assign(result.population.begin(),
                     result.population.begin() + n);
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

}  // namespace

SearchPipeline run_search_pipeline(const SearchSpace& space,
                                   const LabeledDataset& fit,
                                   const LabeledDataset& val,
                                   const LabeledDataset& calib,
                                   const AdaptConfig& cfg) {
  SearchPipeline pipe;
  Rng root(cfg.seed);
  SearchSpace sp = space;
  sp.num_classes = fit.num_classes;
  Rng init_rng = root.derive("init");
  pipe.net = supernet::init_supernet(sp, init_rng);

  ReweightPolicy policy = cfg.policy;
  policy.drw_epoch = drw_epoch_supernet(cfg.supernet_schedule);
  Rng train_rng = root.derive("train");
  supernet::TrainLog log = supernet::train_supernet(
      pipe.net, fit, cfg.supernet_schedule, policy, train_rng,
      TrainOptions{});
  pipe.updates = log.updated_elements;
  pipe.train_epochs = std::move(log.epochs);

  pipe.ranking = search::evolve(pipe.net, evo_for_run(cfg, cfg.seed), calib,
                                val);
  pipe.topk = top_genotypes(pipe.ranking, cfg.retrain_candidates);
  return pipe;
}

AdaptationRun run_p0(const SuperNetwork& source_net,
                     const std::vector<Genotype>& source_topk,
                     const TargetData& target, const AdaptConfig& cfg) {
  if (source_topk.empty())
    throw std::invalid_argument("run_p0: source_topk is empty");
  Stopwatch clock;
  AdaptationRun run;
  run.kind = Procedure::p0;
  stamp_target(run, target, cfg);
  const SearchSpace target_space =
      space_for_target(source_net.space, target.fit);
  for (const Genotype& g : source_topk)
    run.ranking.push_back({g, 0.0});  // ranking inherited, no target fitness
  retrain_and_select(source_topk, target_space, target, cfg, run);
  run.seconds = clock.elapsed();
  return run;
}

AdaptationRun run_p1(const SuperNetwork& source_net, const TargetData& target,
                     const AdaptConfig& cfg) {
  Stopwatch clock;
  AdaptationRun run;
  run.kind = Procedure::p1;
  stamp_target(run, target, cfg);

  Rng root(cfg.seed);
  SuperNetwork net = source_net;
  if (net.space.num_classes != target.fit.num_classes) {
    Rng head_rng = root.derive("head");
    supernet::reshape_classifier(net, target.fit.num_classes, head_rng);
  }
  run.backbone_hash_before = supernet::backbone_hash(net);

  ReweightPolicy policy = cfg.policy;
  policy.drw_epoch = 0;  // re-weighted from the first epoch
  TrainOptions opts;
  opts.train_backbone = false;
  opts.update_norm_stats = false;
  Rng train_rng = root.derive("classifier");
  supernet::TrainLog log = supernet::train_supernet(
      net, target.fit, cfg.adapt_schedule, policy, train_rng, opts);
  run.updates += log.updated_elements;
  run.adapt_epochs = std::move(log.epochs);

  run.backbone_hash_after = supernet::backbone_hash(net);
  if (run.backbone_hash_after != run.backbone_hash_before)
    throw std::runtime_error(
        "run_p1: backbone parameters changed during classifier adaptation");

  EvoResult ranked = search::evolve(net, evo_for_run(cfg, cfg.seed),
                                    target.calib, target.val);
  keep_ranking_slice(run, ranked, cfg.retrain_candidates);
  keep_search_curve(run, ranked);
  retrain_and_select(top_genotypes(ranked, cfg.retrain_candidates), net.space,
                     target, cfg, run);
  run.seconds = clock.elapsed();
  return run;
}

AdaptationRun run_p2(const SuperNetwork& source_net, const TargetData& target,
                     const AdaptConfig& cfg) {
  Stopwatch clock;
  AdaptationRun run;
  run.kind = Procedure::p2;
  stamp_target(run, target, cfg);

  Rng root(cfg.seed);
  SuperNetwork net = source_net;
  if (net.space.num_classes != target.fit.num_classes) {
    Rng head_rng = root.derive("head");
    supernet::reshape_classifier(net, target.fit.num_classes, head_rng);
  }
  run.backbone_hash_before = supernet::backbone_hash(net);

  ReweightPolicy policy = cfg.policy;
  policy.drw_epoch = drw_epoch_finetune(cfg.adapt_schedule);
  Rng train_rng = root.derive("finetune");
  supernet::TrainLog log = supernet::train_supernet(
      net, target.fit, cfg.adapt_schedule, policy, train_rng, TrainOptions{});
  run.updates += log.updated_elements;
  run.adapt_epochs = std::move(log.epochs);
  run.backbone_hash_after = supernet::backbone_hash(net);

  EvoResult ranked = search::evolve(net, evo_for_run(cfg, cfg.seed),
                                    target.calib, target.val);
  keep_ranking_slice(run, ranked, cfg.retrain_candidates);
  keep_search_curve(run, ranked);
  retrain_and_select(top_genotypes(ranked, cfg.retrain_candidates), net.space,
                     target, cfg, run);
  run.seconds = clock.elapsed();
  return run;
}

AdaptationRun run_p3(const SearchSpace& space, const TargetData& target,
                     const AdaptConfig& cfg) {
  Stopwatch clock;
  AdaptationRun run;
  run.kind = Procedure::p3;
  stamp_target(run, target, cfg);

  SearchPipeline pipe = run_search_pipeline(space, target.fit, target.val,
                                            target.calib, cfg);
  run.updates += pipe.updates;
  run.adapt_epochs = std::move(pipe.train_epochs);
  keep_ranking_slice(run, pipe.ranking, cfg.retrain_candidates);
  keep_search_curve(run, pipe.ranking);
  retrain_and_select(pipe.topk, pipe.net.space, target, cfg, run);
  run.seconds = clock.elapsed();
  return run;
}

// ---------------------------------------------------------------------------

namespace {

struct GroupKey {
  Procedure kind;
  imbalance::ProfileKind profile;
  double factor;

  bool operator==(const GroupKey& o) const {
    return kind == o.kind && profile == o.profile && factor == o.factor;
  }
};

}  // namespace

ProcedureComparison compare_procedures(const std::vector<AdaptationRun>& runs) {
  if (runs.empty())
    throw std::invalid_argument("compare_procedures: no runs given");
  for (const AdaptationRun& r : runs)
    if (r.target_base_id != runs.front().target_base_id)
      throw std::invalid_argument(
          "compare_procedures: runs come from different targets");

  std::vector<GroupKey> keys;
  std::vector<std::vector<const AdaptationRun*>> groups;
  for (const AdaptationRun& r : runs) {
    const GroupKey key{r.kind, r.profile, r.factor};
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      groups.emplace_back();
      it = keys.end() - 1;
    }
    groups[static_cast<size_t>(it - keys.begin())].push_back(&r);
  }

  // profile order = first appearance; procedures ascending within everything
  std::vector<std::pair<imbalance::ProfileKind, double>> profile_order;
  for (const GroupKey& k : keys) {
    const auto p = std::make_pair(k.profile, k.factor);
    if (std::find(profile_order.begin(), profile_order.end(), p) ==
        profile_order.end())
      profile_order.push_back(p);
  }

  ProcedureComparison table;
  for (Procedure proc :
       {Procedure::p0, Procedure::p1, Procedure::p2, Procedure::p3}) {
    for (const auto& [profile, factor] : profile_order) {
      const GroupKey key{proc, profile, factor};
      auto it = std::find(keys.begin(), keys.end(), key);
      if (it == keys.end()) continue;
      const auto& group = groups[static_cast<size_t>(it - keys.begin())];
      ComparisonRow row;
      row.kind = proc;
      row.profile = profile;
      row.factor = factor;
      row.seeds = static_cast<int>(group.size());
      double acc = 0.0, upd = 0.0;
      for (const AdaptationRun* r : group) {
        acc += r->accuracy;
        upd += static_cast<double>(r->updates);
      }
      row.mean_accuracy = acc / row.seeds;
      row.mean_updates = upd / row.seeds;
      if (row.seeds > 1) {
        double ss = 0.0;
        for (const AdaptationRun* r : group) {
          const double d = r->accuracy - row.mean_accuracy;
          ss += d * d;
        }
        row.std_accuracy = std::sqrt(ss / (row.seeds - 1));
      }
      table.rows.push_back(row);
    }
  }

  double cheapest = 0.0;
  for (const ComparisonRow& r : table.rows)
    if (cheapest == 0.0 || r.mean_updates < cheapest)
      cheapest = r.mean_updates;
  for (ComparisonRow& r : table.rows)
    r.relative_cost = cheapest > 0.0 ? r.mean_updates / cheapest : 0.0;

  for (const auto& [profile, factor] : profile_order) {
    const ComparisonRow* p0 = nullptr;
    const ComparisonRow* p1 = nullptr;
    const ComparisonRow* p2 = nullptr;
    for (const ComparisonRow& r : table.rows) {
      if (r.profile != profile || r.factor != factor) continue;
      if (r.kind == Procedure::p0) p0 = &r;
      if (r.kind == Procedure::p1) p1 = &r;
      if (r.kind == Procedure::p2) p2 = &r;
    }
    ProfileOrdering o;
    o.profile = profile;
    o.factor = factor;
    o.p1_beats_p2 = p1 && p2 && p1->mean_accuracy > p2->mean_accuracy;
    o.p2_beats_p0 = p2 && p0 && p2->mean_accuracy > p0->mean_accuracy;
    o.full_ordering = o.p1_beats_p2 && o.p2_beats_p0;
    table.orderings.push_back(o);
  }
  return table;
}

std::string comparison_csv(const ProcedureComparison& table) {
  std::ostringstream os;
  os << "procedure,profile,factor,seeds,mean_accuracy,std_accuracy,"
        "relative_cost\n";
  os.setf(std::ios::fixed);
  for (const ComparisonRow& r : table.rows) {
    os.precision(6);
    os << procedure_name(r.kind) << ','
       << imbalance::profile_kind_name(r.profile) << ',' << r.factor << ','
       << r.seeds << ',' << r.mean_accuracy << ',' << r.std_accuracy << ','
       << r.relative_cost << '\n';
  }
  return os.str();
}

std::string summary_line(const AdaptationRun& run) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << procedure_name(run.kind) << ','
     << imbalance::profile_kind_name(run.profile) << ',' << run.factor << ','
     << run.accuracy << ',' << run.updates << ',' << run.seconds;
  return os.str();
}

namespace {

nlohmann::json schedule_to_json(const TrainSchedule& s) {
  return {{"epochs", s.epochs},
          {"initial_lr", s.initial_lr},
          {"milestones", s.milestones},
          {"decay_factor", s.decay_factor},
          {"momentum", s.momentum},
          {"weight_decay", s.weight_decay},
          {"batch_size", s.batch_size}};
}

}  // namespace

void write_run_dir(const AdaptationRun& run, const AdaptConfig& cfg,
                   const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json j;
  j["procedure"] = procedure_name(run.kind);
  j["seed"] = cfg.seed;
  j["profile"] = imbalance::profile_kind_name(run.profile);
  j["factor"] = run.factor;
  j["retrain_candidates"] = cfg.retrain_candidates;
  j["adapt_schedule"] = schedule_to_json(cfg.adapt_schedule);
  j["supernet_schedule"] = schedule_to_json(cfg.supernet_schedule);
  j["retrain_schedule"] = schedule_to_json(cfg.retrain_schedule);
  j["policy"] = {{"gamma", cfg.policy.gamma},
                 {"lambda", cfg.policy.lambda},
                 {"normalize", cfg.policy.normalize}};
  j["evo"] = {{"population", cfg.evo.population},
              {"generations", cfg.evo.generations},
              {"crossover_count", cfg.evo.crossover_count},
              {"mutation_count", cfg.evo.mutation_count},
              {"mutation_rate", cfg.evo.mutation_rate},
              {"top_k", cfg.evo.top_k}};
  {
    std::ofstream os(fs::path(dir) / "config.json");
    os << j.dump(2) << '\n';
  }
  {
    // line-delimited records, one object per line, append-safe
    std::ofstream os(fs::path(dir) / "metrics.jsonl");
    auto record = [&](const char* phase, const supernet::EpochMetric& m) {
      nlohmann::json r = {{"phase", phase},
                          {"epoch", m.epoch},
                          {"loss", m.loss},
                          {"lr", m.lr}};
      os << r.dump() << '\n';
    };
    for (const supernet::EpochMetric& m : run.adapt_epochs)
      record("adapt", m);
    for (const supernet::EpochMetric& m : run.retrain_epochs)
      record("retrain", m);
  }
  if (!run.search_curve.empty()) {
    std::ofstream os(fs::path(dir) / "search.csv");
    os << "generation,best_fitness\n";
    os.setf(std::ios::fixed);
    os.precision(6);
    for (size_t g = 0; g < run.search_curve.size(); ++g)
      os << g << ',' << run.search_curve[g] << '\n';
  }
  {
    std::ofstream os(fs::path(dir) / "class_counts.csv");
    os << "class,count\n";
    for (size_t c = 0; c < run.target_counts.size(); ++c)
      os << c << ',' << run.target_counts[c] << '\n';
  }
  supernet::write_file((fs::path(dir) / "model.ckpt").string(),
                       supernet::save_subnet(run.best_subnet));
  {
    std::ofstream os(fs::path(dir) / "summary.csv");
    os << "procedure,profile,factor,accuracy,updates,seconds\n";
    os << summary_line(run) << '\n';
  }
}

}  // namespace ltnas::adapt
