#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ltnas/adapt.hpp"
#include "ltnas/imbalance.hpp"
#include "ltnas/rng.hpp"
#include "ltnas/search.hpp"
#include "ltnas/space.hpp"
#include "ltnas/supernet.hpp"

namespace ltnas::harness {

// ----------------------------- datasets -----------------------------

struct SynthSpec {
  int classes = 10;
  int per_class = 100;
  int channels = 1;
  int height = 8;
  int width = 8;
  double separation = 3.0;  // distance between class cluster centers
  uint64_t seed = 0;
};

// Gaussian class clusters: per-class unit-variance blobs around centers
// `separation` apart. Deterministic under the seed.
imbalance::LabeledDataset synth_dataset(const SynthSpec& spec);

// Reads fixed 3073-byte records: 1 label byte then 3072 image bytes
// (3 channels x 32 x 32, channel-major). Features are scaled to [0,1] and
// normalized per channel; the constants are stored on the dataset.
imbalance::LabeledDataset ingest_image_dataset(const std::string& path,
                                               int expected_classes);

// Inverse of ingestion: reconstructs the original bytes from the stored
// normalization constants.
void export_image_dataset(const imbalance::LabeledDataset& data,
                          const std::string& path);

// Split index persistence (text: header then one pool index per line).
void write_split_index(const std::string& path,
                       const imbalance::LongTailProfile& profile,
                       uint64_t seed, const std::vector<size_t>& indices);
std::vector<size_t> read_split_index(const std::string& path);

// ----------------------------- statistics -----------------------------

// Spearman rho (average ranks for ties, then Pearson on the ranks) and
// Kendall tau-b (pair enumeration with tie correction). Throws on length
// mismatch, fewer than two entries, or a constant sequence.
std::pair<double, double> rank_correlation(const std::vector<double>& a,
                                           const std::vector<double>& b);

struct PairedComparison {
  int n = 0;
  double mean_diff = 0.0;  // mean of a - b
  double sd_diff = 0.0;    // sample standard deviation of the differences
  double t_stat = 0.0;     // 0 when every difference is zero
  bool degenerate = false; // sd_diff == 0
};

PairedComparison paired_comparison(const std::vector<double>& a,
                                   const std::vector<double>& b);

// One-sided critical value of Student's t at significance `alpha`
// (supported: 0.10, 0.05, 0.01).
double t_critical_one_sided(int df, double alpha);

// True when the paired comparison shows a significantly below b at level
// alpha (one-sided). All-zero differences carry no evidence either way.
bool significantly_less(const PairedComparison& cmp, double alpha);

// ----------------------------- rank transfer -----------------------------

struct RankReport {
  std::vector<std::string> tokens;
  std::vector<double> fitness_balanced;
  std::vector<double> fitness_imbalanced;
  double spearman_rho = 0.0;
  double kendall_tau = 0.0;
};

// Trains every genotype of the space (up to max_genotypes) from scratch,
// once on the balanced task and once on the imbalanced one, and correlates
// the two validation-accuracy rankings.
RankReport rank_transfer_analysis(const space::SearchSpace& space,
                                  const adapt::TargetData& balanced,
                                  const adapt::TargetData& imbalanced,
                                  const supernet::TrainSchedule& schedule,
                                  const imbalance::ReweightPolicy& policy,
                                  uint64_t seed, int max_genotypes);

void write_rank_report(const RankReport& report, const std::string& path);
RankReport read_rank_report(const std::string& path);

// ----------------------------- experiments -----------------------------

struct DataSource {
  std::string kind = "synthetic";  // "synthetic" or "cifar"
  // synthetic
  int per_class = 100;
  int eval_per_class = 50;
  double separation = 3.0;
  uint64_t seed = 0;
  // cifar
  std::string train_path;
  std::string test_path;
};

struct ExperimentConfig {
  space::SpaceConfig space;
  DataSource data;
  std::vector<imbalance::LongTailProfile> profiles;
  adapt::TargetSpec target_spec;  // profile field overridden per sweep entry
  supernet::TrainSchedule supernet_schedule;
  supernet::TrainSchedule adapt_schedule;
  supernet::TrainSchedule retrain_schedule;
  imbalance::ReweightPolicy policy;
  search::EvoConfig evo;
  int retrain_candidates = 1;
  std::vector<adapt::Procedure> procedures;
  std::vector<uint64_t> seeds;
  std::string out_dir = "runs";

  ExperimentConfig();
};

// Strict schema: unknown keys anywhere in the document are rejected.
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const ExperimentConfig& cfg,
                            const std::string& path);
std::string experiment_config_json(const ExperimentConfig& cfg);
ExperimentConfig parse_experiment_config(const std::string& text);

struct ExperimentResult {
  std::vector<adapt::AdaptationRun> runs;
  adapt::ProcedureComparison table;
  std::vector<std::string> run_dirs;
  std::vector<std::string> failures;  // "<run>: <error>" entries
};

// Executes the configured pipeline: source data, source super-network and
// ranking per seed, every procedure on every profile, run directories, a
// summary CSV, and a manifest. Phase failures are recorded and skipped.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Aggregates run directories into a procedure-by-profile CSV plus plots
// (fitness curves, class histograms, and, when a rank report is given, a
// balanced-vs-imbalanced scatter). Deterministic byte-for-byte.
void emit_report(const std::vector<std::string>& run_dirs,
                 const std::string& out_dir,
                 const RankReport* rank = nullptr);

// ----------------------------- plotting -----------------------------

// Minimal deterministic SVG emitters.
std::string svg_line_chart(const std::vector<std::vector<double>>& series,
                           const std::vector<std::string>& names,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label);
std::string svg_bar_chart(const std::vector<double>& values,
                          const std::string& title, const std::string& x_label,
                          const std::string& y_label);
std::string svg_scatter(const std::vector<double>& x,
                        const std::vector<double>& y, const std::string& title,
                        const std::string& x_label, const std::string& y_label,
                        const std::string& annotation);

}  // namespace ltnas::harness
