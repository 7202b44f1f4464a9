#include "ltnas/imbalance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ltnas/kernels.hpp"

namespace ltnas::imbalance {

const char* profile_kind_name(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::balance: return "balance";
    case ProfileKind::exponential: return "exponential";
    case ProfileKind::step: return "step";
  }
  return "?";
}

ProfileKind profile_kind_from_name(const std::string& name) {
  if (name == "balance") return ProfileKind::balance;
  if (name == "exponential") return ProfileKind::exponential;
  if (name == "step") return ProfileKind::step;
  throw std::invalid_argument("unknown imbalance profile '" + name + "'");
}

long long ClassHistogram::total() const {
  long long t = 0;
  for (int c : counts) t += c;
  return t;
}

ClassHistogram longtail_counts(const LongTailProfile& profile,
                               int num_classes) {
  if (num_classes < 1)
    throw std::invalid_argument("longtail_counts: num_classes must be >= 1");
  if (profile.base_count < 1)
    throw std::invalid_argument("longtail_counts: base_count must be >= 1");
  if (!(profile.factor > 0.0) || profile.factor > 1.0)
    throw std::invalid_argument("longtail_counts: factor must be in (0, 1]");

  ClassHistogram hist;
  hist.counts.resize(num_classes);
  const double n_max = static_cast<double>(profile.base_count);
  for (int i = 0; i < num_classes; ++i) {
    double n = n_max;
    switch (profile.kind) {
      case ProfileKind::balance:
        break;
      case ProfileKind::exponential:
        if (num_classes > 1)
          n = std::floor(n_max * std::pow(profile.factor,
                                          static_cast<double>(i) /
                                              (num_classes - 1)));
        break;
      case ProfileKind::step:
        if (i >= (num_classes + 1) / 2)
          n = std::floor(n_max * profile.factor);
        break;
    }
    hist.counts[i] = std::max(1, static_cast<int>(n));
  }
  return hist;
}

std::vector<int> class_counts(const LabeledDataset& data) {
  std::vector<int> counts(data.num_classes, 0);
  for (int y : data.labels) {
    if (y < 0 || y >= data.num_classes)
      throw std::out_of_range("class_counts: label " + std::to_string(y) +
                              " outside [0, " +
                              std::to_string(data.num_classes) + ")");
    ++counts[y];
  }
  return counts;
}

std::vector<size_t> subsample_indices(const LabeledDataset& data,
                                      const ClassHistogram& hist, Rng& rng) {
  if (hist.num_classes() != data.num_classes)
    throw std::invalid_argument("subsample: histogram has " +
                                std::to_string(hist.num_classes()) +
                                " classes, dataset has " +
                                std::to_string(data.num_classes));
  std::vector<std::vector<size_t>> per_class(data.num_classes);
  for (size_t i = 0; i < data.labels.size(); ++i)
    per_class[data.labels[i]].push_back(i);

  std::vector<size_t> chosen;
  for (int j = 0; j < data.num_classes; ++j) {
    const int want = hist.counts[j];
    const auto& avail = per_class[j];
    if (want > static_cast<int>(avail.size()))
      throw std::invalid_argument(
          "subsample: class " + std::to_string(j) + " has " +
          std::to_string(avail.size()) + " examples, profile needs " +
          std::to_string(want) + " (short by " +
          std::to_string(want - static_cast<int>(avail.size())) + ")");
    // std::sample keeps the relative order of the input range
    std::sample(avail.begin(), avail.end(), std::back_inserter(chosen), want,
                rng.gen());
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

LabeledDataset take(const LabeledDataset& data,
                    const std::vector<size_t>& indices) {
  LabeledDataset out;
  out.num_classes = data.num_classes;
  out.channels = data.channels;
  out.height = data.height;
  out.width = data.width;
  out.channel_mean = data.channel_mean;
  out.channel_std = data.channel_std;
  const int dims = data.feature_dims();
  out.features.reserve(indices.size() * dims);
  out.labels.reserve(indices.size());
  for (size_t i : indices) {
    if (i >= data.labels.size())
      throw std::out_of_range("take: index " + std::to_string(i) +
                              " outside dataset of size " +
                              std::to_string(data.labels.size()));
    const double* row = data.example(static_cast<int>(i));
    out.features.insert(out.features.end(), row, row + dims);
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

LabeledDataset subsample(const LabeledDataset& data, const ClassHistogram& hist,
                         Rng& rng) {
  return take(data, subsample_indices(data, hist, rng));
}

std::vector<double> effective_weights_raw(const std::vector<int>& counts,
                                          double gamma, bool normalize) {
  if (!(gamma >= 0.0) || gamma >= 1.0)
    throw std::out_of_range("effective_weights: gamma must lie in [0, 1)");
  std::vector<double> w(counts.size(), 0.0);
  for (size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] < 0)
      throw std::invalid_argument("effective_weights: negative class count");
    if (counts[j] == 0) continue;  // absent class, weight stays 0
    if (gamma == 0.0 || counts[j] == 1) {
      // (1 - gamma) / (1 - gamma^1) cancels exactly
      w[j] = 1.0;
      continue;
    }
    // 1 - gamma^n evaluated as -expm1(n * log(gamma)) to stay accurate as
    // gamma approaches 1
    double one_minus_pow = -std::expm1(counts[j] * std::log(gamma));
    w[j] = (1.0 - gamma) / one_minus_pow;
  }
  if (normalize) {
    double total = 0.0;
    for (double x : w) total += x;
    if (total > 0.0) {
      double s = static_cast<double>(counts.size()) / total;
      for (double& x : w) x *= s;
    }
  }
  return w;
}

std::vector<double> effective_weights(const ClassHistogram& hist, double gamma,
                                      bool normalize) {
  for (size_t j = 0; j + 1 < hist.counts.size(); ++j)
    if (hist.counts[j] < hist.counts[j + 1])
      throw std::invalid_argument(
          "effective_weights: histogram counts must be non-increasing");
  for (int c : hist.counts)
    if (c < 1)
      throw std::invalid_argument(
          "effective_weights: histogram counts must be >= 1");
  return effective_weights_raw(hist.counts, gamma, normalize);
}

std::vector<double> drw_weights_raw(int epoch, const ReweightPolicy& policy,
                                    const std::vector<int>& counts) {
  if (epoch < 0) throw std::out_of_range("drw_weights: negative epoch");
  if (epoch < policy.drw_epoch) return std::vector<double>(counts.size(), 1.0);
  return effective_weights_raw(counts, policy.gamma, policy.normalize);
}

std::vector<double> drw_weights(int epoch, const ReweightPolicy& policy,
                                const ClassHistogram& hist) {
  if (epoch < 0) throw std::out_of_range("drw_weights: negative epoch");
  if (epoch < policy.drw_epoch)
    return std::vector<double>(hist.counts.size(), 1.0);
  return effective_weights(hist, policy.gamma, policy.normalize);
}

namespace {

// Shared reduction: mean over the batch of w_{y_i} * (lse_i - logit_{y_i}).
// `dlogits` may be null.
double ce_core(const Mat& logits, const std::vector<int>& labels,
               const std::vector<double>* class_weights, Mat* dlogits) {
  if (static_cast<int>(labels.size()) != logits.rows)
    throw std::invalid_argument("cross_entropy: batch size mismatch");
  if (logits.rows == 0)
    throw std::invalid_argument("cross_entropy: empty batch");
  if (class_weights &&
      static_cast<int>(class_weights->size()) != logits.cols)
    throw std::invalid_argument(
        "cross_entropy: class weight vector size mismatch");
  if (dlogits) {
    *dlogits = Mat(logits.rows, logits.cols);
  }
  const int B = logits.rows, C = logits.cols;
  double acc = 0.0;
  for (int i = 0; i < B; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= C)
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) +
                              " outside [0, " + std::to_string(C) + ")");
    const double* row = logits.row(i);
    double hi = row[0];
    for (int k = 1; k < C; ++k) hi = std::max(hi, row[k]);
    double z = 0.0;
    for (int k = 0; k < C; ++k) z += std::exp(row[k] - hi);
    const double lse = hi + std::log(z);
    const double wy = class_weights ? (*class_weights)[y] : 1.0;
    acc += wy * (lse - row[y]);
    if (dlogits) {
      double* drow = dlogits->row(i);
      for (int k = 0; k < C; ++k) {
        double p = std::exp(row[k] - hi) / z;
        drow[k] = wy / B * (p - (k == y ? 1.0 : 0.0));
      }
    }
  }
  double loss = acc / B;
  if (!std::isfinite(loss))
    throw std::domain_error("cross_entropy: non-finite loss");
  return loss;
}

}  // namespace

double weighted_cross_entropy(const Mat& logits, const std::vector<int>& labels,
                              const std::vector<double>& class_weights) {
  return ce_core(logits, labels, &class_weights, nullptr);
}

double weighted_cross_entropy_grad(const Mat& logits,
                                   const std::vector<int>& labels,
                                   const std::vector<double>& class_weights,
                                   Mat* dlogits) {
  return ce_core(logits, labels, &class_weights, dlogits);
}

double cross_entropy(const Mat& logits, const std::vector<int>& labels) {
  return ce_core(logits, labels, nullptr, nullptr);
}

double total_loss(double ce_term, double rw_term, double lambda) {
  return ce_term + lambda * rw_term;
}

std::pair<LabeledDataset, LabeledDataset> stratified_holdout(
    const LabeledDataset& data, double fraction, int min_per_class, Rng& rng) {
  if (!(fraction >= 0.0) || fraction >= 1.0)
    throw std::invalid_argument("stratified_holdout: fraction in [0, 1)");
  std::vector<std::vector<size_t>> per_class(data.num_classes);
  for (size_t i = 0; i < data.labels.size(); ++i)
    per_class[data.labels[i]].push_back(i);

  std::vector<size_t> held;
  for (int j = 0; j < data.num_classes; ++j) {
    const auto& avail = per_class[j];
    if (avail.empty()) continue;
    int want = static_cast<int>(
        std::floor(fraction * static_cast<double>(avail.size())));
    want = std::max(want, min_per_class);
    // keep at least one training example per class where possible
    if (static_cast<int>(avail.size()) > 1)
      want = std::min(want, static_cast<int>(avail.size()) - 1);
    else
      want = std::min(want, 1);
    std::sample(avail.begin(), avail.end(), std::back_inserter(held), want,
                rng.gen());
  }
  std::sort(held.begin(), held.end());
  std::vector<size_t> kept;
  size_t hpos = 0;
  for (size_t i = 0; i < data.labels.size(); ++i) {
    if (hpos < held.size() && held[hpos] == i) {
      ++hpos;
      continue;
    }
    kept.push_back(i);
  }
  return {take(data, kept), take(data, held)};
}

LabeledDataset stratified_sample(const LabeledDataset& data, int per_class,
                                 Rng& rng) {
  std::vector<std::vector<size_t>> per_cls(data.num_classes);
  for (size_t i = 0; i < data.labels.size(); ++i)
    per_cls[data.labels[i]].push_back(i);
  std::vector<size_t> chosen;
  for (int j = 0; j < data.num_classes; ++j) {
    int want = std::min<int>(per_class, static_cast<int>(per_cls[j].size()));
    std::sample(per_cls[j].begin(), per_cls[j].end(),
                std::back_inserter(chosen), want, rng.gen());
  }
  std::sort(chosen.begin(), chosen.end());
  return take(data, chosen);
}

}  // namespace ltnas::imbalance
