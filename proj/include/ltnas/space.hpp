#pragma once

#include <string>
#include <vector>

#include "ltnas/rng.hpp"

namespace ltnas::space {

// Candidate operations.  All are shape-preserving on [C x H x W] feature
// maps; the order below is the canonical index order used by genotypes.
enum class OpKind {
  zero = 0,
  skip_connect,
  sep_conv_3x3,
  sep_conv_5x5,
  avg_pool_3x3,
  max_pool_3x3,
};

const char* op_name(OpKind kind);
OpKind op_from_name(const std::string& name);  // throws on unknown name
bool op_has_kernel(OpKind kind);               // separable convs
bool op_has_norm(OpKind kind);                 // convs and pools
int op_kernel_size(OpKind kind);               // 3 or 5, convs/pools

// Directed choice edge inside one cell; source < target.
struct ChoiceEdge {
  int cell = 0;
  int source = 0;
  int target = 0;
};

struct SpaceConfig {
  int num_cells = 1;
  int nodes_per_cell = 3;
  std::vector<std::string> candidate_ops = {
      "zero",          "skip-connect", "separable-conv-3x3",
      "separable-conv-5x5", "avg-pool-3x3", "max-pool-3x3"};
  int channel_width = 8;
  int num_classes = 10;
  // geometry of raw inputs fed to the stem
  int input_channels = 1;
  int input_height = 8;
  int input_width = 8;
};

struct SearchSpace {
  int num_cells = 0;
  int nodes_per_cell = 0;
  std::vector<ChoiceEdge> choice_edges;
  std::vector<OpKind> candidate_ops;
  int channel_width = 0;
  int num_classes = 0;
  int input_channels = 0;
  int input_height = 0;
  int input_width = 0;

  int num_edges() const { return static_cast<int>(choice_edges.size()); }
  int num_ops() const { return static_cast<int>(candidate_ops.size()); }
  // |candidate_ops| ^ num_edges, saturating at 2^62 for large spaces
  long long num_genotypes() const;
  bool same_as(const SearchSpace& other) const;
};

SearchSpace build_search_space(const SpaceConfig& cfg);
SearchSpace build_search_space(int num_cells, int nodes_per_cell,
                               const std::vector<std::string>& candidate_ops,
                               int channel_width, int num_classes);

// One op index per choice edge, aligned with space.choice_edges.
struct Genotype {
  std::vector<int> ops;

  bool operator==(const Genotype& other) const { return ops == other.ops; }
  int size() const { return static_cast<int>(ops.size()); }
};

Genotype random_genotype(const SearchSpace& space, Rng& rng);

// Enumerates every genotype of the space in lexicographic order.
// Errors if the space holds more than `limit` genotypes.
std::vector<Genotype> enumerate_genotypes(const SearchSpace& space,
                                          long long limit = 4096);

// Continuous relaxation scores, one row per edge, one column per op.
struct MixtureParams {
  int num_edges = 0;
  int num_ops = 0;
  std::vector<double> alpha;  // row-major [num_edges x num_ops]

  double* row(int e) { return alpha.data() + static_cast<size_t>(e) * num_ops; }
  const double* row(int e) const {
    return alpha.data() + static_cast<size_t>(e) * num_ops;
  }
};

MixtureParams uniform_mixture(const SearchSpace& space);

// Softmax over one edge's scores.  Shift-invariant, rows sum to 1.
std::vector<double> mixture_weights(const std::vector<double>& alpha_row);

// Per-edge argmax; ties break toward the lowest op index.
Genotype derive_genotype(const MixtureParams& mix);

// Text token: hyphen-separated decimal op indices, e.g. "3-0-5-1".
std::string encode_genotype(const Genotype& g);
Genotype decode_genotype(const std::string& token, const SearchSpace& space);

}  // namespace ltnas::space
