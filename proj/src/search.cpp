#include "ltnas/search.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <stdexcept>
#include <unordered_map>

#include "engine.hpp"

namespace ltnas::search {

using imbalance::LabeledDataset;
using space::Genotype;
using space::MixtureParams;
using space::SearchSpace;
using supernet::Subnet;
using supernet::SuperNetwork;

double top1_accuracy(const Mat& logits, const std::vector<int>& labels) {
  if (logits.rows != static_cast<int>(labels.size()))
    throw std::invalid_argument("top1_accuracy: " + std::to_string(logits.rows) +
                                " logit rows vs " +
                                std::to_string(labels.size()) + " labels");
  if (logits.rows == 0)
    throw std::invalid_argument("top1_accuracy: empty batch");
  int hits = 0;
  for (int i = 0; i < logits.rows; ++i) {
    const double* row = logits.v.data() + static_cast<size_t>(i) * logits.cols;
    int best = 0;
    for (int j = 1; j < logits.cols; ++j)
      if (row[j] > row[best]) best = j;
    if (best == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / logits.rows;
}

double evaluate_fitness(const SuperNetwork& net, const Genotype& g,
                        const LabeledDataset& calib,
                        const LabeledDataset& val) {
  Subnet sub = supernet::extract_subnet(net, g);
  supernet::recalibrate_norm_stats(sub, calib);
  Mat logits = supernet::logits_over_dataset(sub, val);
  return top1_accuracy(logits, val.labels);
}

Genotype crossover(const Genotype& a, const Genotype& b, Rng& rng) {
  if (a.size() != b.size())
    throw std::invalid_argument("crossover: genotype lengths differ");
  Genotype child;
  child.ops.resize(a.size());
  for (int i = 0; i < a.size(); ++i)
    child.ops[i] = rng.bernoulli(0.5) ? b.ops[i] : a.ops[i];
  return child;
}

Genotype mutate(const Genotype& g, const SearchSpace& s, double rate,
                Rng& rng) {
  if (!(rate >= 0.0) || rate > 1.0)
    throw std::invalid_argument("mutate: rate must be in [0, 1]");
  engine::check_genotype(s, g);
  Genotype out = g;
  for (int i = 0; i < out.size(); ++i)
    if (rng.bernoulli(rate)) out.ops[i] = rng.uniform_int(0, s.num_ops() - 1);
  return out;
}

namespace {

void check_evo_config(const EvoConfig& cfg) {
  if (cfg.population < 2)
    throw std::invalid_argument("evolve: population must be >= 2");
  if (cfg.generations < 1)
    throw std::invalid_argument("evolve: generations must be >= 1");
  if (cfg.crossover_count < 0 || cfg.mutation_count < 0)
    throw std::invalid_argument("evolve: negative breeding counts");
  if (!(cfg.mutation_rate >= 0.0) || cfg.mutation_rate > 1.0)
    throw std::invalid_argument("evolve: mutation_rate must be in [0, 1]");
  if (cfg.top_k < 1 || cfg.top_k > cfg.population)
    throw std::invalid_argument("evolve: top_k must be in [1, population]");
  if (cfg.crossover_count + cfg.mutation_count > cfg.population)
    throw std::invalid_argument(
        "evolve: crossover_count + mutation_count exceeds the population");
}

struct FitnessCache {
  const FitnessFn& fn;
  std::unordered_map<std::string, double> seen;
  int misses = 0;

  double score(const Genotype& g) {
    const std::string key = space::encode_genotype(g);
    auto it = seen.find(key);
    if (it != seen.end()) return it->second;
    const double f = fn(g);
    ++misses;
    seen.emplace(key, f);
    return f;
  }
};

// Stable sort keeps discovery order among equal fitness values.
void sort_by_fitness(std::vector<ScoredGenotype>& pop) {
  std::stable_sort(pop.begin(), pop.end(),
                   [](const ScoredGenotype& a, const ScoredGenotype& b) {
                     return a.fitness > b.fitness;
                   });
}

}  // namespace

EvoResult evolve_with(const SearchSpace& s, const EvoConfig& cfg,
                      const FitnessFn& fitness) {
  check_evo_config(cfg);
  FitnessCache cache{fitness, {}, 0};
  EvoResult result;

  std::vector<ScoredGenotype> pop;
  std::unordered_map<std::string, bool> in_pop;
  auto try_add = [&](std::vector<ScoredGenotype>& dst, const Genotype& g) {
    const std::string key = space::encode_genotype(g);
    if (in_pop.count(key)) return false;
    in_pop.emplace(key, true);
    dst.push_back({g, cache.score(g)});
    return true;
  };

  // generation 0: distinct random genotypes, falling back to duplicates only
  // when the space is too small to fill the population
  for (int slot = 0; slot < cfg.population; ++slot) {
    Rng r(Rng(cfg.seed).derive("init", 0, slot));
    bool added = false;
    for (int attempt = 0; attempt < 100 && !added; ++attempt)
      added = try_add(pop, space::random_genotype(s, r));
    if (!added) {
      Genotype g = space::random_genotype(s, r);
      pop.push_back({g, cache.score(g)});
    }
  }
  sort_by_fitness(pop);
  result.best_per_generation.push_back(pop.front());

  for (int gen = 1; gen < cfg.generations; ++gen) {
    std::vector<ScoredGenotype> next(pop.begin(), pop.begin() + cfg.top_k);
    in_pop.clear();
    for (const ScoredGenotype& sg : next)
      in_pop.emplace(space::encode_genotype(sg.genotype), true);

    for (int slot = 0; slot < cfg.crossover_count &&
                       static_cast<int>(next.size()) < cfg.population;
         ++slot) {
      Rng r(Rng(cfg.seed).derive("cx", gen, slot));
      for (int attempt = 0; attempt < 100; ++attempt) {
        const int ia = r.uniform_int(0, cfg.top_k - 1);
        const int ib = r.uniform_int(0, cfg.top_k - 1);
        Genotype child = crossover(pop[ia].genotype, pop[ib].genotype, r);
        if (try_add(next, child)) break;
      }
    }
    for (int slot = 0; slot < cfg.mutation_count &&
                       static_cast<int>(next.size()) < cfg.population;
         ++slot) {
      Rng r(Rng(cfg.seed).derive("mut", gen, slot));
      for (int attempt = 0; attempt < 100; ++attempt) {
        const int ip = r.uniform_int(0, cfg.top_k - 1);
        Genotype child = mutate(pop[ip].genotype, s, cfg.mutation_rate, r);
        if (try_add(next, child)) break;
      }
    }
    // breeding exhausted its retry budget on a saturated space: pad randomly
    for (int slot = 0; static_cast<int>(next.size()) < cfg.population;
         ++slot) {
      Rng r(Rng(cfg.seed).derive("fill", gen, slot));
      bool added = false;
      for (int attempt = 0; attempt < 100 && !added; ++attempt)
        added = try_add(next, space::random_genotype(s, r));
      if (!added) {
        Genotype g = space::random_genotype(s, r);
        next.push_back({g, cache.score(g)});
      }
    }

    pop = std::move(next);
    sort_by_fitness(pop);
    result.best_per_generation.push_back(pop.front());
  }

  pop.resize(cfg.top_k);
  result.population = std::move(pop);
  result.evaluations = cache.misses;
  return result;
}

EvoResult evolve(const SuperNetwork& net, const EvoConfig& cfg,
                 const LabeledDataset& calib, const LabeledDataset& val) {
  return evolve_with(net.space, cfg, [&](const Genotype& g) {
    return evaluate_fitness(net, g, calib, val);
  });
}

// ---------------------------------------------------------------------------

BilevelState init_bilevel(const SearchSpace& s) {
  BilevelState st;
  st.mixture = space::uniform_mixture(s);
  return st;
}

double mixture_loss_and_alpha_grad(const SuperNetwork& net,
                                   const MixtureParams& mix,
                                   const Batch& input,
                                   const std::vector<int>& labels,
                                   const std::vector<double>& class_weights,
                                   std::vector<double>* dalpha) {
  auto& mut = const_cast<SuperNetwork&>(net);
  engine::MixtureTape tape;
  Mat logits =
      engine::forward_mixture(mut, mix, input, engine::StatsMode::eval, tape);
  Mat dlogits;
  const double loss = imbalance::weighted_cross_entropy_grad(
      logits, labels, class_weights, &dlogits);
  engine::MixtureGrads grads;
  engine::backward_mixture(mut, mix, input, tape, dlogits, grads);
  if (dalpha) *dalpha = std::move(grads.alpha);
  return loss;
}

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

struct ParamSnapshot {
  std::vector<std::vector<double>> blocks;

  explicit ParamSnapshot(const SuperNetwork& net) {
    blocks.push_back(net.stem_w);
    blocks.push_back(net.stem_b);
    for (const auto& ops : net.edge_ops)
      for (const auto& p : ops) {
        blocks.push_back(p.dw);
        blocks.push_back(p.pw);
        blocks.push_back(p.norm.gamma);
        blocks.push_back(p.norm.beta);
        blocks.push_back(p.norm.mean);
        blocks.push_back(p.norm.var);
      }
    blocks.push_back(net.cls_w);
    blocks.push_back(net.cls_b);
  }

  void restore(SuperNetwork& net) const {
    size_t at = 0;
    net.stem_w = blocks[at++];
    net.stem_b = blocks[at++];
    for (auto& ops : net.edge_ops)
      for (auto& p : ops) {
        p.dw = blocks[at++];
        p.pw = blocks[at++];
        p.norm.gamma = blocks[at++];
        p.norm.beta = blocks[at++];
        p.norm.mean = blocks[at++];
        p.norm.var = blocks[at++];
      }
    net.cls_w = blocks[at++];
    net.cls_b = blocks[at++];
  }
};

void plain_sgd(std::vector<double>& w, const std::vector<double>& g,
               double lr) {
  for (size_t i = 0; i < w.size(); ++i) w[i] = engine::f32(w[i] - lr * g[i]);
}

std::vector<int> sample_batch_indices(int n, int batch, Rng& rng) {
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  if (batch >= n) return all;
  std::vector<int> picked;
  picked.reserve(batch);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), batch,
              rng.gen());
  return picked;
}

}  // namespace

BilevelMetrics bilevel_step(SuperNetwork& net, BilevelState& state,
                            const LabeledDataset& train,
                            const LabeledDataset& val,
                            const std::vector<double>& class_weights,
                            const BilevelConfig& cfg, Rng& rng) {
  if (cfg.batch_size < 1)
    throw std::invalid_argument("bilevel_step: batch_size must be >= 1");
  if (cfg.weight_lr < 0.0 || cfg.arch_lr < 0.0)
    throw std::invalid_argument("bilevel_step: negative learning rate");
  if (train.size() == 0 || val.size() == 0)
    throw std::invalid_argument("bilevel_step: empty dataset");

  ParamSnapshot snapshot(net);
  const MixtureParams mix_before = state.mixture;
  BilevelMetrics metrics;

  try {
    // phase 1: shared weights on a training batch under the current mixture
    Rng tr = rng.derive("bilevel-train", state.step_counter);
    std::vector<int> tidx =
        sample_batch_indices(train.size(), cfg.batch_size, tr);
    std::vector<int> tlabels;
    Batch tx = engine::gather_batch(train, tidx, 0,
                                    static_cast<int>(tidx.size()), &tlabels);
    // Running statistics stay fixed through both phases (the backward pass
    // treats them as constants); they are recalibrated before evaluation.
    engine::MixtureTape ttape;
    Mat tlogits = engine::forward_mixture(net, state.mixture, tx,
                                          engine::StatsMode::eval, ttape);
    Mat tdlogits;
    metrics.train_loss = imbalance::weighted_cross_entropy_grad(
        tlogits, tlabels, class_weights, &tdlogits);
    if (!std::isfinite(metrics.train_loss))
      throw std::runtime_error("bilevel_step: non-finite training loss");
    engine::MixtureGrads tgrads;
    engine::backward_mixture(net, state.mixture, tx, ttape, tdlogits, tgrads);

    plain_sgd(net.stem_w, tgrads.stem_w, cfg.weight_lr);
    plain_sgd(net.stem_b, tgrads.stem_b, cfg.weight_lr);
    for (int e = 0; e < net.space.num_edges(); ++e)
      for (int o = 0; o < net.space.num_ops(); ++o) {
        auto& p = net.edge_ops[e][o];
        auto& g = tgrads.edge_ops[e][o];
        plain_sgd(p.dw, g.dw, cfg.weight_lr);
        plain_sgd(p.pw, g.pw, cfg.weight_lr);
        plain_sgd(p.norm.gamma, g.gamma, cfg.weight_lr);
        plain_sgd(p.norm.beta, g.beta, cfg.weight_lr);
      }
    plain_sgd(net.cls_w, tgrads.cls_w, cfg.weight_lr);
    plain_sgd(net.cls_b, tgrads.cls_b, cfg.weight_lr);

    // phase 2: architecture parameters on a validation batch
    Rng vr = rng.derive("bilevel-val", state.step_counter);
    std::vector<int> vidx =
        sample_batch_indices(val.size(), cfg.batch_size, vr);
    std::vector<int> vlabels;
    Batch vx = engine::gather_batch(val, vidx, 0,
                                    static_cast<int>(vidx.size()), &vlabels);
    std::vector<double> dalpha;
    metrics.val_loss = mixture_loss_and_alpha_grad(
        net, state.mixture, vx, vlabels, class_weights, &dalpha);
    if (!std::isfinite(metrics.val_loss) || !all_finite(dalpha))
      throw std::runtime_error(
          "bilevel_step: non-finite validation loss or architecture gradient");
    for (size_t i = 0; i < state.mixture.alpha.size(); ++i)
      state.mixture.alpha[i] -= cfg.arch_lr * dalpha[i];
  } catch (...) {
    snapshot.restore(net);
    state.mixture = mix_before;
    throw;
  }
  ++state.step_counter;
  return metrics;
}

BilevelResult bilevel_search(SuperNetwork& net, const LabeledDataset& train,
                             const LabeledDataset& val,
                             const std::vector<double>& class_weights,
                             const BilevelConfig& cfg, int steps, Rng& rng) {
  if (steps < 1)
    throw std::invalid_argument("bilevel_search: steps must be >= 1");
  BilevelResult result;
  BilevelState state = init_bilevel(net.space);
  result.steps.reserve(steps);
  for (int i = 0; i < steps; ++i)
    result.steps.push_back(
        bilevel_step(net, state, train, val, class_weights, cfg, rng));
  result.mixture = state.mixture;
  result.genotype = space::derive_genotype(state.mixture);
  return result;
}

}  // namespace ltnas::search
