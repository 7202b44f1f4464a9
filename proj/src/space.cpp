#include "ltnas/space.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ltnas::space {

namespace {

constexpr const char* kOpNames[] = {
    "zero",          "skip-connect", "separable-conv-3x3",
    "separable-conv-5x5", "avg-pool-3x3", "max-pool-3x3"};
constexpr int kNumOpKinds = 6;

}  // namespace

const char* op_name(OpKind kind) { return kOpNames[static_cast<int>(kind)]; }

OpKind op_from_name(const std::string& name) {
  for (int i = 0; i < kNumOpKinds; ++i)
    if (name == kOpNames[i]) return static_cast<OpKind>(i);
  throw std::invalid_argument("unknown candidate op '" + name + "'");
}

bool op_has_kernel(OpKind kind) {
  return kind == OpKind::sep_conv_3x3 || kind == OpKind::sep_conv_5x5;
}

bool op_has_norm(OpKind kind) {
  return kind != OpKind::zero && kind != OpKind::skip_connect;
}

int op_kernel_size(OpKind kind) {
  return kind == OpKind::sep_conv_5x5 ? 5 : 3;
}

long long SearchSpace::num_genotypes() const {
  const long long cap = 1ll << 62;
  long long total = 1;
  for (int e = 0; e < num_edges(); ++e) {
    if (total > cap / std::max(1, num_ops())) return cap;
    total *= num_ops();
  }
  return total;
}

bool SearchSpace::same_as(const SearchSpace& other) const {
  return num_cells == other.num_cells &&
         nodes_per_cell == other.nodes_per_cell &&
         candidate_ops == other.candidate_ops &&
         channel_width == other.channel_width &&
         num_classes == other.num_classes &&
         input_channels == other.input_channels &&
         input_height == other.input_height &&
         input_width == other.input_width;
}

SearchSpace build_search_space(const SpaceConfig& cfg) {
  if (cfg.num_cells < 1) throw std::invalid_argument("num_cells must be >= 1");
  if (cfg.nodes_per_cell < 2)
    throw std::invalid_argument("nodes_per_cell must be >= 2");
  if (cfg.candidate_ops.empty())
    throw std::invalid_argument("candidate_ops must be non-empty");
  if (cfg.channel_width < 1)
    throw std::invalid_argument("channel_width must be >= 1");
  if (cfg.num_classes < 2)
    throw std::invalid_argument("num_classes must be >= 2");
  if (cfg.input_channels < 1 || cfg.input_height < 1 || cfg.input_width < 1)
    throw std::invalid_argument("input geometry must be positive");

  SearchSpace s;
  s.num_cells = cfg.num_cells;
  s.nodes_per_cell = cfg.nodes_per_cell;
  s.channel_width = cfg.channel_width;
  s.num_classes = cfg.num_classes;
  s.input_channels = cfg.input_channels;
  s.input_height = cfg.input_height;
  s.input_width = cfg.input_width;

  s.candidate_ops.reserve(cfg.candidate_ops.size());
  for (const auto& name : cfg.candidate_ops) {
    OpKind kind = op_from_name(name);
    for (OpKind seen : s.candidate_ops)
      if (seen == kind)
        throw std::invalid_argument("duplicate candidate op '" + name + "'");
    s.candidate_ops.push_back(kind);
  }

  // all (source, target) pairs with source < target, lexicographic per cell
  for (int cell = 0; cell < s.num_cells; ++cell)
    for (int src = 0; src < s.nodes_per_cell; ++src)
      for (int dst = src + 1; dst < s.nodes_per_cell; ++dst)
        s.choice_edges.push_back({cell, src, dst});
  return s;
}

SearchSpace build_search_space(int num_cells, int nodes_per_cell,
                               const std::vector<std::string>& candidate_ops,
                               int channel_width, int num_classes) {
  SpaceConfig cfg;
  cfg.num_cells = num_cells;
  cfg.nodes_per_cell = nodes_per_cell;
  cfg.candidate_ops = candidate_ops;
  cfg.channel_width = channel_width;
  cfg.num_classes = num_classes;
  return build_search_space(cfg);
}

Genotype random_genotype(const SearchSpace& space, Rng& rng) {
  Genotype g;
  g.ops.resize(space.num_edges());
  for (int e = 0; e < space.num_edges(); ++e)
    g.ops[e] = rng.uniform_int(0, space.num_ops() - 1);
  return g;
}

std::vector<Genotype> enumerate_genotypes(const SearchSpace& space,
                                          long long limit) {
  long long total = space.num_genotypes();
  if (total > limit)
    throw std::invalid_argument("space holds " + std::to_string(total) +
                                " genotypes, enumeration limit is " +
                                std::to_string(limit));
  std::vector<Genotype> all;
  all.reserve(static_cast<size_t>(total));
  Genotype g;
  g.ops.assign(space.num_edges(), 0);
  for (long long i = 0; i < total; ++i) {
    all.push_back(g);
    for (int e = space.num_edges() - 1; e >= 0; --e) {
      if (++g.ops[e] < space.num_ops()) break;
      g.ops[e] = 0;
    }
  }
  return all;
}

MixtureParams uniform_mixture(const SearchSpace& space) {
  MixtureParams m;
  m.num_edges = space.num_edges();
  m.num_ops = space.num_ops();
  m.alpha.assign(static_cast<size_t>(m.num_edges) * m.num_ops, 0.0);
  return m;
}

std::vector<double> mixture_weights(const std::vector<double>& alpha_row) {
  if (alpha_row.empty())
    throw std::invalid_argument("mixture_weights: empty score row");
  double hi = -std::numeric_limits<double>::infinity();
  for (double a : alpha_row) {
    if (!std::isfinite(a))
      throw std::domain_error("mixture_weights: non-finite score");
    hi = std::max(hi, a);
  }
  std::vector<double> w(alpha_row.size());
  double z = 0.0;
  for (size_t i = 0; i < alpha_row.size(); ++i) {
    w[i] = std::exp(alpha_row[i] - hi);
    z += w[i];
  }
  for (double& x : w) x /= z;
  return w;
}

Genotype derive_genotype(const MixtureParams& mix) {
  Genotype g;
  g.ops.resize(mix.num_edges);
  for (int e = 0; e < mix.num_edges; ++e) {
    const double* row = mix.row(e);
    int best = 0;
    for (int o = 1; o < mix.num_ops; ++o)
      if (row[o] > row[best]) best = o;
    g.ops[e] = best;
  }
  return g;
}

std::string encode_genotype(const Genotype& g) {
  std::string out;
  for (int e = 0; e < g.size(); ++e) {
    if (e) out += '-';
    out += std::to_string(g.ops[e]);
  }
  return out;
}

Genotype decode_genotype(const std::string& token, const SearchSpace& space) {
  Genotype g;
  if (space.num_edges() == 0) {
    if (!token.empty())
      throw std::invalid_argument(
          "genotype token for a zero-edge space must be empty");
    return g;
  }
  size_t pos = 0;
  for (int e = 0; e < space.num_edges(); ++e) {
    if (pos >= token.size())
      throw std::invalid_argument("genotype token '" + token +
                                  "' is too short at position " +
                                  std::to_string(pos));
    size_t next = token.find('-', pos);
    std::string part = token.substr(
        pos, next == std::string::npos ? std::string::npos : next - pos);
    if (part.empty() ||
        part.find_first_not_of("0123456789") != std::string::npos)
      throw std::invalid_argument("genotype token '" + token +
                                  "' has a malformed index at position " +
                                  std::to_string(pos));
    int idx = std::stoi(part);
    if (idx >= space.num_ops())
      throw std::invalid_argument(
          "genotype token '" + token + "' references op index " +
          std::to_string(idx) + " at position " + std::to_string(pos) +
          " but the space has " + std::to_string(space.num_ops()) + " ops");
    g.ops.push_back(idx);
    if (next == std::string::npos) {
      pos = token.size();
      if (e + 1 < space.num_edges())
        throw std::invalid_argument("genotype token '" + token + "' has " +
                                    std::to_string(e + 1) + " entries, space " +
                                    "expects " +
                                    std::to_string(space.num_edges()));
    } else {
      pos = next + 1;
    }
  }
  if (pos < token.size())
    throw std::invalid_argument("genotype token '" + token +
                                "' has trailing entries, space expects " +
                                std::to_string(space.num_edges()));
  return g;
}

}  // namespace ltnas::space
