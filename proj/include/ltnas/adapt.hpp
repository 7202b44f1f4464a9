#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltnas/imbalance.hpp"
#include "ltnas/search.hpp"
#include "ltnas/space.hpp"
#include "ltnas/supernet.hpp"

namespace ltnas::adapt {

// The four transfer procedures, ordered from cheapest to the paragon:
//   p0  retrain the source-ranked subnets on the target, no re-ranking
//   p1  freeze the backbone, retrain the classifier, re-rank on the target
//   p2  fine-tune backbone and classifier at reduced lr, re-rank
//   p3  train a fresh super-network on the target and search from scratch
enum class Procedure { p0, p1, p2, p3 };

const char* procedure_name(Procedure p);
Procedure procedure_from_name(const std::string& name);

// A prepared target task: the long-tailed training split plus held-out
// validation (genotype selection), calibration (statistics), and a balanced
// evaluation split that final accuracies are reported on.
struct TargetData {
  imbalance::LabeledDataset fit;
  imbalance::LabeledDataset val;
  imbalance::LabeledDataset calib;
  imbalance::LabeledDataset eval;
  imbalance::ProfileKind profile = imbalance::ProfileKind::balance;
  double factor = 1.0;
  uint64_t base_id = 0;  // identity of the pool the target was carved from
  uint64_t id = 0;       // identity of the concrete fit split
};

struct TargetSpec {
  imbalance::LongTailProfile profile;
  double holdout_fraction = 0.25;  // of the tailed data, for validation
  int calib_per_class = 16;
  int min_holdout_per_class = 1;
};

// Carves a long-tailed target out of a balanced pool. The evaluation pool
// stays balanced and untouched.
TargetData make_target(const imbalance::LabeledDataset& train_pool,
                       const imbalance::LabeledDataset& eval_pool,
                       const TargetSpec& spec, Rng& rng);

struct AdaptConfig {
  supernet::TrainSchedule adapt_schedule;     // p1 classifier / p2 fine-tune
  supernet::TrainSchedule supernet_schedule;  // p3 super-network phase
  supernet::TrainSchedule retrain_schedule;   // final from-scratch retraining
  imbalance::ReweightPolicy policy;  // gamma/lambda; drw_epoch set per phase
  search::EvoConfig evo;             // ranking configuration, shared by p1-p3
  int retrain_candidates = 1;        // how many top genotypes get retrained
  uint64_t seed = 0;

  AdaptConfig();
};

// Deferred re-weighting onsets used by the phases, derived from a schedule:
// super-network training defers to 70% of the budget, fine-tuning to 50%,
// from-scratch retraining to the first lr milestone.
int drw_epoch_supernet(const supernet::TrainSchedule& s);
int drw_epoch_finetune(const supernet::TrainSchedule& s);
int drw_epoch_retrain(const supernet::TrainSchedule& s);

struct AdaptationRun {
  Procedure kind = Procedure::p0;
  uint64_t seed = 0;
  imbalance::ProfileKind profile = imbalance::ProfileKind::balance;
  double factor = 1.0;
  uint64_t target_id = 0;
  uint64_t target_base_id = 0;

  space::Genotype chosen;        // genotype of the reported model
  double accuracy = 0.0;         // top-1 on the balanced evaluation split
  double val_accuracy = 0.0;     // selection metric on the validation split
  unsigned long long updates = 0;  // SGD-updated parameter elements, all phases
  double seconds = 0.0;

  std::vector<supernet::EpochMetric> adapt_epochs;    // procedure phase
  std::vector<supernet::EpochMetric> retrain_epochs;  // selected candidate
  std::vector<search::ScoredGenotype> ranking;        // final ranking slice
  std::vector<double> search_curve;  // best fitness per generation, p1-p3
  std::vector<int> target_counts;    // class histogram of the fit split
  supernet::Subnet best_subnet;

  uint64_t backbone_hash_before = 0;  // p1/p2 only
  uint64_t backbone_hash_after = 0;
};

// Shared super-network pipeline: initialize, train with deferred
// re-weighting, rank by evolutionary search. Used for source training and as
// the body of p3.
struct SearchPipeline {
  supernet::SuperNetwork net;
  search::EvoResult ranking;
  std::vector<space::Genotype> topk;
  unsigned long long updates = 0;
  std::vector<supernet::EpochMetric> train_epochs;
};

SearchPipeline run_search_pipeline(const space::SearchSpace& space,
                                   const imbalance::LabeledDataset& fit,
                                   const imbalance::LabeledDataset& val,
                                   const imbalance::LabeledDataset& calib,
                                   const AdaptConfig& cfg);

// p0: retrains each source-ranked genotype from scratch on the target and
// reports the best. The ranking is entirely inherited from the source.
AdaptationRun run_p0(const supernet::SuperNetwork& source_net,
                     const std::vector<space::Genotype>& source_topk,
                     const TargetData& target, const AdaptConfig& cfg);

// p1: transfers the source super-network, freezes every backbone parameter
// and statistic, retrains only the classifier with re-weighting from the
// first epoch, then re-ranks on the target. Throws if the backbone hash
// moves.
AdaptationRun run_p1(const supernet::SuperNetwork& source_net,
                     const TargetData& target, const AdaptConfig& cfg);

// p2: transfers the source super-network and fine-tunes all parameters at
// the reduced adaptation learning rate with re-weighting deferred to half
// the budget, then re-ranks on the target.
AdaptationRun run_p2(const supernet::SuperNetwork& source_net,
                     const TargetData& target, const AdaptConfig& cfg);

// p3: ignores the source entirely; trains a fresh super-network on the
// target with deferred re-weighting, searches, and retrains the best
// genotype. The paragon.
AdaptationRun run_p3(const space::SearchSpace& space, const TargetData& target,
                     const AdaptConfig& cfg);

// ---------------------------------------------------------------------------

struct ComparisonRow {
  Procedure kind = Procedure::p0;
  imbalance::ProfileKind profile = imbalance::ProfileKind::balance;
  double factor = 1.0;
  int seeds = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation, 0 for one seed
  double mean_updates = 0.0;
  double relative_cost = 0.0;  // mean updates over the cheapest row's mean
};

struct ProfileOrdering {
  imbalance::ProfileKind profile = imbalance::ProfileKind::balance;
  double factor = 1.0;
  bool p1_beats_p2 = false;
  bool p2_beats_p0 = false;
  bool full_ordering = false;  // p1 > p2 > p0 on mean accuracy
};

struct ProcedureComparison {
  std::vector<ComparisonRow> rows;  // procedures ascending, then profile order
  std::vector<ProfileOrdering> orderings;
};

// Aggregates runs into a procedure-by-profile table. All runs must share the
// same target pool; seeds aggregate into mean and standard deviation.
ProcedureComparison compare_procedures(const std::vector<AdaptationRun>& runs);

std::string comparison_csv(const ProcedureComparison& table);

// Writes a self-contained run directory: config snapshot, per-epoch metric
// records, the final checkpoint, and a one-line summary.
void write_run_dir(const AdaptationRun& run, const AdaptConfig& cfg,
                   const std::string& dir);

std::string summary_line(const AdaptationRun& run);

uint64_t dataset_identity(const imbalance::LabeledDataset& data);

}  // namespace ltnas::adapt
