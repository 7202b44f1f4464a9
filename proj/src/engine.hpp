#pragma once

// Internal forward/backward engine shared by the super-network, the bilevel
// search step, and subnet training.  Not installed.

#include <vector>

#include "ltnas/imbalance.hpp"
#include "ltnas/space.hpp"
#include "ltnas/supernet.hpp"
#include "ltnas/tensor.hpp"

namespace ltnas::engine {

using imbalance::LabeledDataset;
using space::Genotype;
using space::MixtureParams;
using space::OpKind;
using space::SearchSpace;
using supernet::NormState;
using supernet::OpParams;
using supernet::Subnet;
using supernet::SuperNetwork;
using supernet::TrainOptions;
using supernet::TrainSchedule;

// eval: use stored stats; train: use stored stats, then EMA-refresh them for
// later steps; recalibrate: overwrite stats with the batch statistics and
// normalize with the new values.
enum class StatsMode { eval, train, recalibrate };

constexpr double kNormEps = 1e-5;
constexpr double kStatMomentum = 0.1;

// rounds through float32 so every persisted value stays exactly
// representable in the checkpoint encoding
inline double f32(double x) {
  return static_cast<double>(static_cast<float>(x));
}
void f32_round(std::vector<double>& v);

struct OpTape {
  Batch r;    // post-relu (convs)
  Batch t;    // post-depthwise (convs)
  Batch u;    // pre-norm (convs and pools)
  Batch out;  // op output
  std::vector<int> argmax;               // max-pool winners
  std::vector<double> mean, inv_std, scale;  // normalization as applied
};

struct OpGrads {
  std::vector<double> dw, pw, gamma, beta;
};

struct PathGrads {
  std::vector<double> stem_w, stem_b, cls_w, cls_b;
  std::vector<OpGrads> edge;  // selected op per edge
};

struct MixtureGrads {
  std::vector<double> stem_w, stem_b, cls_w, cls_b;
  std::vector<std::vector<OpGrads>> edge_ops;  // [edge][op]
  std::vector<double> alpha;                   // [edge x op]
};

struct OpVel {
  std::vector<double> dw, pw, gamma, beta;
};

struct SgdState {
  std::vector<double> stem_w, stem_b, cls_w, cls_b;
  std::vector<std::vector<OpVel>> edge;  // [edge][slot]
};

// One concrete architecture: a supernet path or a standalone subnet.
struct ModelView {
  const SearchSpace* space = nullptr;
  std::vector<double>* stem_w = nullptr;
  std::vector<double>* stem_b = nullptr;
  std::vector<double>* cls_w = nullptr;
  std::vector<double>* cls_b = nullptr;
  std::vector<OpParams*> edge_op;  // selected op per edge
  std::vector<int> edge_slot;      // optimizer velocity slot per edge
};

ModelView view_of(SuperNetwork& net, const Genotype& g);
ModelView view_of(Subnet& sub);

struct PathTape {
  Batch stem_out;
  std::vector<Batch> node_vals;  // [cell * nodes_per_cell + node]
  std::vector<OpTape> edge;      // selected op per edge
  Mat pooled, logits;
};

struct MixtureTape {
  Batch stem_out;
  std::vector<Batch> node_vals;
  std::vector<std::vector<OpTape>> edge_ops;  // [edge][op]
  std::vector<std::vector<double>> probs;     // [edge][op]
  Mat pooled, logits;
};

void check_input(const SearchSpace& s, const Batch& x);
void check_genotype(const SearchSpace& s, const Genotype& g);
int edge_offset(int nodes_per_cell, int source, int target);

Mat forward_path(const ModelView& v, const Batch& x, StatsMode mode,
                 PathTape& tape);
void backward_path(const ModelView& v, const Batch& x, const PathTape& tape,
                   const Mat& dlogits, PathGrads& grads);

Mat forward_mixture(SuperNetwork& net, const MixtureParams& mix, const Batch& x,
                    StatsMode mode, MixtureTape& tape);
void backward_mixture(SuperNetwork& net, const MixtureParams& mix,
                      const Batch& x, const MixtureTape& tape,
                      const Mat& dlogits, MixtureGrads& grads);

void sgd_init(SgdState& st, const SuperNetwork& net);
void sgd_init(SgdState& st, const Subnet& sub);
// Applies SGD with momentum and weight decay to the view's blocks in a fixed
// order (stem, edges ascending, classifier), honoring the train flags.
// Returns the number of updated parameter elements.
unsigned long long sgd_apply_path(const ModelView& v, const PathGrads& grads,
                                  SgdState& st, double lr, double momentum,
                                  double wd, const TrainOptions& opts);

Batch gather_batch(const LabeledDataset& data, const std::vector<int>& order,
                   size_t start, int count, std::vector<int>* labels);

}  // namespace ltnas::engine
