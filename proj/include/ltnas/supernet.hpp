#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltnas/imbalance.hpp"
#include "ltnas/rng.hpp"
#include "ltnas/space.hpp"
#include "ltnas/tensor.hpp"

namespace ltnas::supernet {

// Milestone step schedule: the learning rate at an epoch is
// initial_lr * decay_factor^(number of milestones <= epoch).
struct TrainSchedule {
  int epochs = 0;
  double initial_lr = 0.1;
  std::vector<int> milestones;  // strictly increasing, within [0, epochs)
  double decay_factor = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 128;
};

TrainSchedule default_supernet_schedule();    // 500 epochs, lr 0.1, {300, 400}
TrainSchedule default_subnet_schedule();      // 200 epochs, lr 0.1, {160, 180}
TrainSchedule default_adaptation_schedule();  // 200 epochs, lr 0.01, {100}

double lr_at_epoch(const TrainSchedule& schedule, int epoch);
uint64_t schedule_fingerprint(const TrainSchedule& schedule);

// Per-channel normalization with tracked statistics.  gamma/beta are
// trainable; mean/var are running statistics treated as constants by the
// backward pass and refreshed either by the training EMA or by explicit
// recalibration.
struct NormState {
  std::vector<double> gamma, beta, mean, var;
};

struct OpParams {
  space::OpKind kind = space::OpKind::zero;
  std::vector<double> dw;  // depthwise kernel [C * k * k], convs only
  std::vector<double> pw;  // pointwise mixing [C * C], convs only
  NormState norm;          // convs and pools
};

// Weight-sharing super-network: disjoint parameter blocks per
// (choice edge, candidate op) plus a shared stem and linear classifier.
struct SuperNetwork {
  space::SearchSpace space;
  std::vector<double> stem_w;  // [channel_width * input_channels]
  std::vector<double> stem_b;  // [channel_width]
  std::vector<std::vector<OpParams>> edge_ops;  // [edge][op]
  std::vector<double> cls_w;   // [num_classes * channel_width]
  std::vector<double> cls_b;   // [num_classes]
  long epoch_counter = 0;
  uint64_t rng_seed = 0;
  uint64_t schedule_fp = 0;
};

// Standalone network for one genotype.
struct Subnet {
  space::SearchSpace space;
  space::Genotype genotype;
  std::vector<double> stem_w, stem_b;
  std::vector<OpParams> ops;  // one per edge
  std::vector<double> cls_w, cls_b;
  long epoch_counter = 0;
  uint64_t rng_seed = 0;
  uint64_t schedule_fp = 0;
};

SuperNetwork init_supernet(const space::SearchSpace& space, Rng& rng);
Subnet init_subnet(const space::SearchSpace& space, const space::Genotype& g,
                   Rng& rng);
// Re-initializes the classifier for a new class count (used when moving a
// backbone to a target task); backbone blocks are untouched.
void reshape_classifier(SuperNetwork& net, int num_classes, Rng& rng);

// Eval-mode forwards (no statistics updates, inputs never mutated).
Mat forward_with_path(const SuperNetwork& net, const space::Genotype& g,
                      const Batch& input);
Mat forward_with_mixture(const SuperNetwork& net,
                         const space::MixtureParams& mix, const Batch& input);
Mat forward_subnet(const Subnet& sub, const Batch& input);

// Batched eval-mode logits over a whole dataset.
Mat logits_over_dataset(const SuperNetwork& net, const space::Genotype& g,
                        const imbalance::LabeledDataset& data,
                        int batch_size = 256);
Mat logits_over_dataset(const Subnet& sub,
                        const imbalance::LabeledDataset& data,
                        int batch_size = 256);

struct EpochMetric {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  bool train_backbone = true;
  bool train_classifier = true;
  bool update_norm_stats = true;
};

struct TrainLog {
  std::vector<EpochMetric> epochs;
  unsigned long long updated_elements = 0;
};

// One uniformly sampled path per optimization step; SGD with momentum and
// weight decay; class weights follow the deferred re-weighting policy.
TrainLog train_supernet(SuperNetwork& net, const imbalance::LabeledDataset& data,
                        const TrainSchedule& schedule,
                        const imbalance::ReweightPolicy& policy, Rng& rng,
                        const TrainOptions& opts = {});
TrainLog train_subnet(Subnet& sub, const imbalance::LabeledDataset& data,
                      const TrainSchedule& schedule,
                      const imbalance::ReweightPolicy& policy, Rng& rng);

// Recomputes running normalization statistics along the genotype's path over
// the calibration set, in computation order.  Trainable weights untouched;
// calling twice with the same data is a no-op the second time.
void recalibrate_norm_stats(SuperNetwork& net, const space::Genotype& g,
                            const imbalance::LabeledDataset& calib);
void recalibrate_norm_stats(Subnet& sub,
                            const imbalance::LabeledDataset& calib);

// Copies the stem, the chosen op block per edge, and the classifier.
Subnet extract_subnet(const SuperNetwork& net, const space::Genotype& g);

size_t trainable_param_count(const SuperNetwork& net);
size_t trainable_param_count(const Subnet& sub);

// Hash over every backbone block (stem and all per-edge op parameters and
// statistics); excludes the classifier.
uint64_t backbone_hash(const SuperNetwork& net);

// Versioned binary container: text header (format version, space
// description, epoch, seed state, schedule fingerprint, header checksum)
// followed by named float32 little-endian parameter blocks in a fixed
// declared order.
std::vector<uint8_t> save_checkpoint(const SuperNetwork& net);
SuperNetwork load_checkpoint(const std::vector<uint8_t>& bytes);
SuperNetwork load_checkpoint(const std::vector<uint8_t>& bytes,
                             const space::SearchSpace& expected);
std::vector<uint8_t> save_subnet(const Subnet& sub);
Subnet load_subnet(const std::vector<uint8_t>& bytes);

void write_file(const std::string& path, const std::vector<uint8_t>& bytes);
std::vector<uint8_t> read_file(const std::string& path);

}  // namespace ltnas::supernet
