#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ltnas/harness.hpp"
#include "ltnas/kernels.hpp"

namespace ltnas::harness {

using imbalance::LabeledDataset;

// ----------------------------- synthesis -----------------------------

LabeledDataset synth_dataset(const SynthSpec& spec) {
  if (spec.classes < 2)
    throw std::invalid_argument("synth_dataset: need at least 2 classes");
  if (spec.per_class < 1)
    throw std::invalid_argument("synth_dataset: per_class must be >= 1");
  if (spec.channels < 1 || spec.height < 1 || spec.width < 1)
    throw std::invalid_argument("synth_dataset: bad feature geometry");

  const int dims = spec.channels * spec.height * spec.width;
  LabeledDataset d;
  d.num_classes = spec.classes;
  d.channels = spec.channels;
  d.height = spec.height;
  d.width = spec.width;
  d.features.reserve(static_cast<size_t>(spec.classes) * spec.per_class *
                     dims);
  d.labels.reserve(static_cast<size_t>(spec.classes) * spec.per_class);

  Rng root(spec.seed);
  // class centers on a sphere of radius separation/sqrt(2): random
  // directions in high dimension are near-orthogonal, so pairwise center
  // distances concentrate around `separation`
  Rng center_rng = root.derive("centers");
  std::vector<std::vector<double>> centers(spec.classes,
                                           std::vector<double>(dims));
  const double radius = spec.separation / std::sqrt(2.0);
  for (int c = 0; c < spec.classes; ++c) {
    double norm2 = 0.0;
    for (int k = 0; k < dims; ++k) {
      centers[c][k] = center_rng.normal(0.0, 1.0);
      norm2 += centers[c][k] * centers[c][k];
    }
    const double scale = norm2 > 0.0 ? radius / std::sqrt(norm2) : 0.0;
    for (int k = 0; k < dims; ++k) centers[c][k] *= scale;
  }
  for (int c = 0; c < spec.classes; ++c) {
    Rng class_rng = root.derive("class", c);
    for (int i = 0; i < spec.per_class; ++i) {
      for (int k = 0; k < dims; ++k)
        d.features.push_back(centers[c][k] + class_rng.normal(0.0, 1.0));
      d.labels.push_back(c);
    }
  }
  return d;
}

// ----------------------------- ingestion -----------------------------

namespace {

constexpr int kImageChannels = 3;
constexpr int kImageSide = 32;
constexpr int kImageBytes = kImageChannels * kImageSide * kImageSide;  // 3072
constexpr int kRecordBytes = kImageBytes + 1;                          // 3073

}  // namespace

LabeledDataset ingest_image_dataset(const std::string& path,
                                    int expected_classes) {
  if (expected_classes < 2)
    throw std::invalid_argument(
        "ingest_image_dataset: expected_classes must be >= 2");
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw std::runtime_error("ingest_image_dataset: cannot open '" + path +
                             "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
  if (bytes.empty())
    throw std::runtime_error("ingest_image_dataset: '" + path + "' is empty");
  if (bytes.size() % kRecordBytes != 0)
    throw std::runtime_error(
        "ingest_image_dataset: file size " + std::to_string(bytes.size()) +
        " is not a multiple of the " + std::to_string(kRecordBytes) +
        "-byte record (remainder " +
        std::to_string(bytes.size() % kRecordBytes) + ", last whole record "
        "ends at byte offset " +
        std::to_string(bytes.size() - bytes.size() % kRecordBytes) + ")");

  const size_t n = bytes.size() / kRecordBytes;
  LabeledDataset d;
  d.num_classes = expected_classes;
  d.channels = kImageChannels;
  d.height = kImageSide;
  d.width = kImageSide;
  d.labels.reserve(n);
  d.features.resize(n * kImageBytes);

  for (size_t i = 0; i < n; ++i) {
    const size_t offset = i * kRecordBytes;
    const int label = bytes[offset];
    if (label >= expected_classes)
      throw std::runtime_error(
          "ingest_image_dataset: label " + std::to_string(label) +
          " at byte offset " + std::to_string(offset) + " exceeds the " +
          std::to_string(expected_classes) + "-class limit");
    d.labels.push_back(label);
    double* out = d.features.data() + i * kImageBytes;
    for (int k = 0; k < kImageBytes; ++k)
      out[k] = bytes[offset + 1 + k] / 255.0;
  }

  // per-channel normalization; a constant channel keeps std 1 so its values
  // center to zero without blowing up
  d.channel_mean.resize(kImageChannels);
  d.channel_std.resize(kImageChannels);
  const size_t plane = static_cast<size_t>(kImageSide) * kImageSide;
  std::vector<double> channel_values(n * plane);
  for (int c = 0; c < kImageChannels; ++c) {
    for (size_t i = 0; i < n; ++i)
      std::copy_n(d.features.data() + i * kImageBytes + c * plane, plane,
                  channel_values.data() + i * plane);
    double mean = 0.0, var = 0.0;
    kernels::mean_var(channel_values.size(), channel_values.data(), &mean,
                      &var);
    d.channel_mean[c] = mean;
    d.channel_std[c] = var > 0.0 ? std::sqrt(var) : 1.0;
    for (size_t i = 0; i < n; ++i) {
      double* px = d.features.data() + i * kImageBytes + c * plane;
      for (size_t k = 0; k < plane; ++k)
        px[k] = (px[k] - mean) / d.channel_std[c];
    }
  }
  return d;
}

void export_image_dataset(const LabeledDataset& data,
                          const std::string& path) {
  if (data.channels != kImageChannels || data.height != kImageSide ||
      data.width != kImageSide)
    throw std::invalid_argument(
        "export_image_dataset: dataset is not in 3x32x32 image layout");
  if (data.channel_mean.size() != kImageChannels ||
      data.channel_std.size() != kImageChannels)
    throw std::invalid_argument(
        "export_image_dataset: dataset has no stored normalization "
        "constants");
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw std::runtime_error("export_image_dataset: cannot open '" + path +
                             "'");
  const size_t plane = static_cast<size_t>(kImageSide) * kImageSide;
  std::vector<uint8_t> record(kRecordBytes);
  for (int i = 0; i < data.size(); ++i) {
    record[0] = static_cast<uint8_t>(data.labels[i]);
    const double* px = data.example(i);
    for (int c = 0; c < kImageChannels; ++c)
      for (size_t k = 0; k < plane; ++k) {
        const double raw =
            px[c * plane + k] * data.channel_std[c] + data.channel_mean[c];
        const double scaled = std::lround(raw * 255.0);
        record[1 + c * plane + k] =
            static_cast<uint8_t>(std::clamp(scaled, 0.0, 255.0));
      }
    os.write(reinterpret_cast<const char*>(record.data()), kRecordBytes);
  }
  if (!os)
    throw std::runtime_error("export_image_dataset: failed writing '" + path +
                             "'");
}

// ----------------------------- split indices -----------------------------

void write_split_index(const std::string& path,
                       const imbalance::LongTailProfile& profile,
                       uint64_t seed, const std::vector<size_t>& indices) {
  std::ofstream os(path);
  if (!os)
    throw std::runtime_error("write_split_index: cannot open '" + path + "'");
  os << "ltnas-split v1\n";
  os << "profile: " << imbalance::profile_kind_name(profile.kind) << '\n';
  os << "factor: " << profile.factor << '\n';
  os << "base_count: " << profile.base_count << '\n';
  os << "seed: " << seed << '\n';
  os << "count: " << indices.size() << "\n\n";
  for (size_t i : indices) os << i << '\n';
}

std::vector<size_t> read_split_index(const std::string& path) {
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("read_split_index: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line != "ltnas-split v1")
    throw std::runtime_error("read_split_index: '" + path +
                             "' is not a split index file");
  size_t count = 0;
  bool have_count = false;
  while (std::getline(is, line) && !line.empty()) {
    if (line.rfind("count: ", 0) == 0) {
      count = std::stoull(line.substr(7));
      have_count = true;
    }
  }
  if (!have_count)
    throw std::runtime_error("read_split_index: missing count field");
  std::vector<size_t> indices;
  indices.reserve(count);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    indices.push_back(std::stoull(line));
  }
  if (indices.size() != count)
    throw std::runtime_error("read_split_index: header declares " +
                             std::to_string(count) + " indices, file holds " +
                             std::to_string(indices.size()));
  return indices;
}

// ----------------------------- statistics -----------------------------

namespace {

std::vector<double> fractional_ranks(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + j) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

bool is_constant(const std::vector<double>& v) {
  for (double x : v)
    if (x != v.front()) return false;
  return true;
}

}  // namespace

std::pair<double, double> rank_correlation(const std::vector<double>& a,
                                           const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("rank_correlation: sequence lengths differ (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  if (a.size() < 2)
    throw std::invalid_argument(
        "rank_correlation: need at least two entries");
  if (is_constant(a) || is_constant(b))
    throw std::invalid_argument(
        "rank_correlation: a constant sequence has no rank order");

  const double rho = pearson(fractional_ranks(a), fractional_ranks(b));

  // Kendall tau-b over all pairs with tie correction
  const size_t n = a.size();
  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0) ++ties_a;
      if (db == 0.0) ++ties_b;
      if (da != 0.0 && db != 0.0) {
        if (da * db > 0.0)
          ++concordant;
        else
          ++discordant;
      }
    }
  const double n0 = static_cast<double>(n) * (n - 1) / 2.0;
  const double tau =
      (concordant - discordant) /
      std::sqrt((n0 - static_cast<double>(ties_a)) *
                (n0 - static_cast<double>(ties_b)));
  return {rho, tau};
}

PairedComparison paired_comparison(const std::vector<double>& a,
                                   const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument(
        "paired_comparison: sequence lengths differ");
  if (a.size() < 2)
    throw std::invalid_argument("paired_comparison: need at least two pairs");
  PairedComparison cmp;
  cmp.n = static_cast<int>(a.size());
  for (size_t i = 0; i < a.size(); ++i) cmp.mean_diff += a[i] - b[i];
  cmp.mean_diff /= cmp.n;
  double ss = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - cmp.mean_diff;
    ss += d * d;
  }
  cmp.sd_diff = std::sqrt(ss / (cmp.n - 1));
  cmp.degenerate = cmp.sd_diff == 0.0;
  if (!cmp.degenerate)
    cmp.t_stat = cmp.mean_diff / (cmp.sd_diff / std::sqrt(cmp.n));
  return cmp;
}

double t_critical_one_sided(int df, double alpha) {
  if (df < 1)
    throw std::invalid_argument("t_critical_one_sided: df must be >= 1");
  static const double t10[] = {3.078, 1.886, 1.638, 1.533, 1.476, 1.440,
                               1.415, 1.397, 1.383, 1.372, 1.363, 1.356,
                               1.350, 1.345, 1.341, 1.337, 1.333, 1.330,
                               1.328, 1.325, 1.323, 1.321, 1.319, 1.318,
                               1.316, 1.315, 1.314, 1.313, 1.311, 1.310};
  static const double t05[] = {6.314, 2.920, 2.353, 2.132, 2.015, 1.943,
                               1.895, 1.860, 1.833, 1.812, 1.796, 1.782,
                               1.771, 1.761, 1.753, 1.746, 1.740, 1.734,
                               1.729, 1.725, 1.721, 1.717, 1.714, 1.711,
                               1.708, 1.706, 1.703, 1.701, 1.699, 1.697};
  static const double t01[] = {31.821, 6.965, 4.541, 3.747, 3.365, 3.143,
                               2.998,  2.896, 2.821, 2.764, 2.718, 2.681,
                               2.650,  2.624, 2.602, 2.583, 2.567, 2.552,
                               2.539,  2.528, 2.518, 2.508, 2.500, 2.492,
                               2.485,  2.479, 2.473, 2.467, 2.462, 2.457};
  const double* table;
  double tail;
  if (alpha == 0.10) {
    table = t10;
    tail = 1.282;
  } else if (alpha == 0.05) {
    table = t05;
    tail = 1.645;
  } else if (alpha == 0.01) {
    table = t01;
    tail = 2.326;
  } else {
    throw std::invalid_argument(
        "t_critical_one_sided: supported levels are 0.10, 0.05, 0.01");
  }
  return df <= 30 ? table[df - 1] : tail;
}

bool significantly_less(const PairedComparison& cmp, double alpha) {
  if (cmp.degenerate) return cmp.mean_diff < 0.0;
  return cmp.t_stat < -t_critical_one_sided(cmp.n - 1, alpha);
}

}  // namespace ltnas::harness
