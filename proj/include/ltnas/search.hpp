#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ltnas/imbalance.hpp"
#include "ltnas/rng.hpp"
#include "ltnas/space.hpp"
#include "ltnas/supernet.hpp"

namespace ltnas::search {

// Top-1 accuracy of row-wise argmax against labels. Ties resolve to the
// lowest class index.
double top1_accuracy(const Mat& logits, const std::vector<int>& labels);

// Extracts the genotype's subnet, recalibrates its normalization statistics
// on `calib`, and returns validation top-1 accuracy. The supernet itself is
// left untouched.
double evaluate_fitness(const supernet::SuperNetwork& net,
                        const space::Genotype& g,
                        const imbalance::LabeledDataset& calib,
                        const imbalance::LabeledDataset& val);

struct ScoredGenotype {
  space::Genotype genotype;
  double fitness = 0.0;
};

struct EvoConfig {
  int population = 20;
  int generations = 50;
  int crossover_count = 25;   // offspring bred per generation
  int mutation_count = 25;    // mutants bred per generation
  double mutation_rate = 0.1; // per-gene redraw probability
  int top_k = 10;             // elites carried over and parent pool size
  uint64_t seed = 0;
};

struct EvoResult {
  std::vector<ScoredGenotype> population;  // final top_k, fitness descending
  std::vector<ScoredGenotype> best_per_generation;
  int evaluations = 0;  // fitness calls, cache misses only
};

// Gene-wise uniform crossover: each edge takes its op from parent a or b
// with equal probability.
space::Genotype crossover(const space::Genotype& a, const space::Genotype& b,
                          Rng& rng);

// Per-gene mutation: with probability `rate` the gene is redrawn uniformly
// from all candidate ops (the redraw may repeat the current op).
space::Genotype mutate(const space::Genotype& g, const space::SearchSpace& s,
                       double rate, Rng& rng);

using FitnessFn = std::function<double(const space::Genotype&)>;

// Evolutionary search over genotypes with elitism and duplicate rejection.
// Deterministic for a fixed config: every random decision comes from streams
// derived from (seed, generation, slot). Fitness values are cached by
// genotype, so `evaluations` counts distinct genotypes scored.
EvoResult evolve_with(const space::SearchSpace& s, const EvoConfig& cfg,
                      const FitnessFn& fitness);

// The standard instantiation: fitness is validation accuracy after
// extraction and recalibration.
EvoResult evolve(const supernet::SuperNetwork& net, const EvoConfig& cfg,
                 const imbalance::LabeledDataset& calib,
                 const imbalance::LabeledDataset& val);

// ---------------------------------------------------------------------------
// Differentiable search over the mixture relaxation.

struct BilevelConfig {
  double weight_lr = 0.025;
  double arch_lr = 3e-4;
  int batch_size = 64;
};

struct BilevelState {
  space::MixtureParams mixture;
  int step_counter = 0;
};

BilevelState init_bilevel(const space::SearchSpace& s);

struct BilevelMetrics {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

// One first-order alternating step: (1) update shared weights by plain SGD
// on the training batch under the current mixture, (2) update architecture
// parameters on the validation batch with weights fixed. If either phase
// produces a non-finite loss or gradient the step throws and both the
// network and the mixture are restored to their state on entry.
BilevelMetrics bilevel_step(supernet::SuperNetwork& net, BilevelState& state,
                            const imbalance::LabeledDataset& train,
                            const imbalance::LabeledDataset& val,
                            const std::vector<double>& class_weights,
                            const BilevelConfig& cfg, Rng& rng);

// Mixture-mode loss on a batch plus the architecture gradient, with network
// weights treated as constants. Exposed for gradient checking.
double mixture_loss_and_alpha_grad(const supernet::SuperNetwork& net,
                                   const space::MixtureParams& mix,
                                   const Batch& input,
                                   const std::vector<int>& labels,
                                   const std::vector<double>& class_weights,
                                   std::vector<double>* dalpha);

// Runs `steps` bilevel iterations and returns the genotype decoded from the
// final mixture by per-edge argmax.
struct BilevelResult {
  space::Genotype genotype;
  space::MixtureParams mixture;
  std::vector<BilevelMetrics> steps;
};

BilevelResult bilevel_search(supernet::SuperNetwork& net,
                             const imbalance::LabeledDataset& train,
                             const imbalance::LabeledDataset& val,
                             const std::vector<double>& class_weights,
                             const BilevelConfig& cfg, int steps, Rng& rng);

}  // namespace ltnas::search
