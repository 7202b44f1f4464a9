#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltnas/rng.hpp"
#include "ltnas/tensor.hpp"

namespace ltnas::imbalance {

// Labeled examples with flat per-example features interpretable as
// [channels x height x width] maps.
struct LabeledDataset {
  int num_classes = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> features;  // [size x feature_dims]
  std::vector<int> labels;
  // per-channel normalization constants applied at ingestion (empty when the
  // features were generated directly)
  std::vector<double> channel_mean;
  std::vector<double> channel_std;

  int size() const { return static_cast<int>(labels.size()); }
  int feature_dims() const { return channels * height * width; }
  const double* example(int i) const {
    return features.data() + static_cast<size_t>(i) * feature_dims();
  }
  double* example(int i) {
    return features.data() + static_cast<size_t>(i) * feature_dims();
  }
};

enum class ProfileKind { balance, exponential, step };

const char* profile_kind_name(ProfileKind kind);
ProfileKind profile_kind_from_name(const std::string& name);

struct LongTailProfile {
  ProfileKind kind = ProfileKind::balance;
  double factor = 1.0;   // imbalance factor in (0, 1]
  int base_count = 0;    // n_max, size of the largest class
};

// Per-class example counts, index-aligned with class labels sorted by
// decreasing cardinality (class 0 is the head).
struct ClassHistogram {
  std::vector<int> counts;

  int num_classes() const { return static_cast<int>(counts.size()); }
  long long total() const;
};

// counts[i] for class i of num_classes:
//   balance      n_max
//   exponential  floor(n_max * factor^(i / (num_classes - 1)))
//   step         n_max for the first ceil(C/2) classes, floor(n_max * factor)
//                for the rest
// every count clamped to >= 1
ClassHistogram longtail_counts(const LongTailProfile& profile,
                               int num_classes);

// Indices into `data` realizing `hist`: per class, a uniform without-
// replacement draw that preserves the original relative order, emitted in
// ascending global order.
std::vector<size_t> subsample_indices(const LabeledDataset& data,
                                      const ClassHistogram& hist, Rng& rng);
LabeledDataset subsample(const LabeledDataset& data, const ClassHistogram& hist,
                         Rng& rng);
LabeledDataset take(const LabeledDataset& data,
                    const std::vector<size_t>& indices);

// Raw per-class counts of a dataset (no sortedness requirement).
std::vector<int> class_counts(const LabeledDataset& data);

struct ReweightPolicy {
  double gamma = 0.9999;   // effective-number decay, in [0, 1)
  double lambda = 0.0;     // weight of the re-weighted term in total_loss
  int drw_epoch = 0;       // epoch (0-based) at which re-weighting turns on
  bool normalize = true;   // rescale weights to sum to num_classes
};

// w_j = (1 - gamma) / (1 - gamma^{n_j}); classes with n_j = 0 get weight 0.
// With normalize, weights are rescaled to sum to the number of classes.
std::vector<double> effective_weights_raw(const std::vector<int>& counts,
                                          double gamma, bool normalize);
std::vector<double> effective_weights(const ClassHistogram& hist, double gamma,
                                      bool normalize = true);

// All-ones (exactly) before policy.drw_epoch, effective weights at and after.
std::vector<double> drw_weights_raw(int epoch, const ReweightPolicy& policy,
                                    const std::vector<int>& counts);
std::vector<double> drw_weights(int epoch, const ReweightPolicy& policy,
                                const ClassHistogram& hist);

// Mean over the batch of w_{y_i} * (-log softmax(logits_i)[y_i]).
double weighted_cross_entropy(const Mat& logits, const std::vector<int>& labels,
                              const std::vector<double>& class_weights);
// Same reduction, additionally filling d(loss)/d(logits).
double weighted_cross_entropy_grad(const Mat& logits,
                                   const std::vector<int>& labels,
                                   const std::vector<double>& class_weights,
                                   Mat* dlogits);
// Unweighted cross entropy; identical reduction order as the weighted form
// with all-ones weights.
double cross_entropy(const Mat& logits, const std::vector<int>& labels);

// ce + lambda * rw
double total_loss(double ce_term, double rw_term, double lambda);

// Holds out a seeded stratified fraction (at least min_per_class per class
// where available).  Returns {kept, held_out}.
std::pair<LabeledDataset, LabeledDataset> stratified_holdout(
    const LabeledDataset& data, double fraction, int min_per_class, Rng& rng);

// Seeded stratified pick of up to per_class examples from each class.
LabeledDataset stratified_sample(const LabeledDataset& data, int per_class,
                                 Rng& rng);

}  // namespace ltnas::imbalance
