#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltnas/rng.hpp"
#include "ltnas/space.hpp"

using namespace ltnas;
using namespace ltnas::space;

namespace {

SearchSpace tiny_space(int cells, int nodes,
                       std::vector<std::string> ops = {"zero", "skip-connect"},
                       int classes = 4) {
  SpaceConfig cfg;
  cfg.num_cells = cells;
  cfg.nodes_per_cell = nodes;
  cfg.candidate_ops = std::move(ops);
  cfg.channel_width = 4;
  cfg.num_classes = classes;
  return build_search_space(cfg);
}

}  // namespace

TEST_CASE("choice edges enumerate all source<target pairs lexicographically") {
  auto s = tiny_space(1, 2);
  CHECK(s.num_edges() == 1);
  CHECK(s.choice_edges[0].source == 0);
  CHECK(s.choice_edges[0].target == 1);

  auto s2 = tiny_space(2, 4, {"zero", "skip-connect", "separable-conv-3x3",
                              "separable-conv-5x5", "avg-pool-3x3",
                              "max-pool-3x3"});
  CHECK(s2.num_edges() == 12);

  auto s3 = tiny_space(1, 4);
  std::vector<std::pair<int, int>> expect = {{0, 1}, {0, 2}, {0, 3},
                                             {1, 2}, {1, 3}, {2, 3}};
  REQUIRE(s3.num_edges() == 6);
  for (int e = 0; e < 6; ++e) {
    CHECK(s3.choice_edges[e].cell == 0);
    CHECK(s3.choice_edges[e].source == expect[e].first);
    CHECK(s3.choice_edges[e].target == expect[e].second);
    CHECK(s3.choice_edges[e].source < s3.choice_edges[e].target);
  }

  auto s4 = tiny_space(3, 3);
  REQUIRE(s4.num_edges() == 9);
  for (int e = 0; e < 9; ++e) CHECK(s4.choice_edges[e].cell == e / 3);
}

TEST_CASE("genotype counting") {
  auto s = tiny_space(1, 3);  // 3 edges, 2 ops
  CHECK(s.num_edges() == 3);
  CHECK(s.num_ops() == 2);
  CHECK(s.num_genotypes() == 8);

  auto s6 = tiny_space(1, 3, {"zero", "skip-connect", "separable-conv-3x3",
                              "separable-conv-5x5", "avg-pool-3x3",
                              "max-pool-3x3"});
  CHECK(s6.num_genotypes() == 216);  // 6^3
}

TEST_CASE("unknown op names are rejected by name") {
  SpaceConfig cfg;
  cfg.candidate_ops = {"zero", "conv-7x7"};
  CHECK_THROWS_WITH_AS(build_search_space(cfg),
                       doctest::Contains("conv-7x7"), std::invalid_argument);
}

TEST_CASE("op name round trip") {
  for (auto kind : {OpKind::zero, OpKind::skip_connect, OpKind::sep_conv_3x3,
                    OpKind::sep_conv_5x5, OpKind::avg_pool_3x3,
                    OpKind::max_pool_3x3}) {
    CHECK(op_from_name(op_name(kind)) == kind);
  }
  CHECK_THROWS_AS(op_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("random_genotype is uniform, in range, and seed-deterministic") {
  auto s1 = tiny_space(1, 3, {"zero"});
  Rng r1(5);
  auto g = random_genotype(s1, r1);
  CHECK(g.ops == std::vector<int>{0, 0, 0});

  auto s = tiny_space(1, 3);  // 8 genotypes
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) {
    auto ga = random_genotype(s, a);
    auto gb = random_genotype(s, b);
    CHECK(ga == gb);
    for (int v : ga.ops) {
      CHECK(v >= 0);
      CHECK(v < s.num_ops());
    }
  }

  // 10,000 draws over 8 genotypes: each within 3 sigma of uniform
  Rng r(2024);
  std::vector<int> freq(8, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto gi = random_genotype(s, r);
    int code = gi.ops[0] * 4 + gi.ops[1] * 2 + gi.ops[2];
    ++freq[code];
  }
  double p = 1.0 / 8.0;
  double sigma = std::sqrt(draws * p * (1 - p));
  for (int c = 0; c < 8; ++c) {
    CAPTURE(c);
    CHECK(std::abs(freq[c] - draws * p) <= 3 * sigma);
  }
}

TEST_CASE("random_genotype reaches the whole product space") {
  auto s = tiny_space(1, 3);  // 8 genotypes
  Rng r(7);
  std::set<std::string> seen;
  for (int i = 0; i < 2000 && seen.size() < 8; ++i)
    seen.insert(encode_genotype(random_genotype(s, r)));
  CHECK(seen.size() == 8);
}

TEST_CASE("enumerate_genotypes is exhaustive and lexicographic") {
  auto s = tiny_space(1, 3);
  auto all = enumerate_genotypes(s);
  REQUIRE(all.size() == 8);
  CHECK(all.front().ops == std::vector<int>{0, 0, 0});
  CHECK(all[1].ops == std::vector<int>{0, 0, 1});
  CHECK(all.back().ops == std::vector<int>{1, 1, 1});
  std::set<std::string> tokens;
  for (const auto& g : all) tokens.insert(encode_genotype(g));
  CHECK(tokens.size() == 8);

  CHECK_THROWS_AS(enumerate_genotypes(s, 4), std::invalid_argument);
}

TEST_CASE("mixture_weights is a softmax") {
  auto w = mixture_weights({0.0, 0.0, 0.0});
  REQUIRE(w.size() == 3);
  for (double x : w) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  auto w2 = mixture_weights({std::log(2.0), 0.0, 0.0});
  CHECK(w2[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w2[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(w2[2] == doctest::Approx(0.25).epsilon(1e-12));

  auto w3 = mixture_weights({10.0, 0.0, 0.0});
  CHECK(w3[0] >= 0.9999);

  CHECK_THROWS_AS(mixture_weights({0.0, std::nan("")}), std::domain_error);
}

TEST_CASE("mixture_weights rows sum to one and are shift-invariant") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    int n = rng.uniform_int(1, 8);
    std::vector<double> row(n), shifted(n);
    double c = rng.uniform(-50.0, 50.0);
    for (int i = 0; i < n; ++i) {
      row[i] = rng.uniform(-10.0, 10.0);
      shifted[i] = row[i] + c;
    }
    auto w = mixture_weights(row);
    auto ws = mixture_weights(shifted);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(w[i] > 0.0);
      CHECK(w[i] < 1.0 + 1e-12);
      CHECK(std::abs(w[i] - ws[i]) < 1e-6);
      total += w[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("derive_genotype takes per-edge argmax with low-index ties") {
  MixtureParams mix;
  mix.num_edges = 3;
  mix.num_ops = 3;
  mix.alpha = {0.1, 0.9, 0.2,   // unique argmax at 1
               0.5, 0.5, 0.5,   // tie -> 0
               2.0, 2.0, 3.0};  // unique argmax at 2
  auto g = derive_genotype(mix);
  CHECK(g.ops == std::vector<int>{1, 0, 2});

  // one-hot rows at k derive to all-k
  for (int k = 0; k < 3; ++k) {
    MixtureParams hot;
    hot.num_edges = 2;
    hot.num_ops = 3;
    hot.alpha.assign(6, 0.0);
    hot.alpha[k] = 5.0;
    hot.alpha[3 + k] = 5.0;
    auto gk = derive_genotype(hot);
    CHECK(gk.ops == std::vector<int>{k, k});
  }

  // argmax is invariant under per-row shifts
  MixtureParams shifted = mix;
  for (int e = 0; e < 3; ++e)
    for (int o = 0; o < 3; ++o) shifted.row(e)[o] += 17.5 * (e + 1);
  CHECK(derive_genotype(shifted) == g);
}

TEST_CASE("uniform_mixture matches the space and derives genotype zero") {
  auto s = tiny_space(2, 3);
  auto mix = uniform_mixture(s);
  CHECK(mix.num_edges == s.num_edges());
  CHECK(mix.num_ops == s.num_ops());
  CHECK(derive_genotype(mix).ops == std::vector<int>(s.num_edges(), 0));
}

TEST_CASE("genotype token encode/decode round trip") {
  auto s = tiny_space(1, 4, {"zero", "skip-connect", "separable-conv-3x3",
                             "separable-conv-5x5", "avg-pool-3x3",
                             "max-pool-3x3"});
  Genotype g{{3, 0, 5, 1, 2, 4}};
  CHECK(encode_genotype(g) == "3-0-5-1-2-4");
  CHECK(decode_genotype("3-0-5-1-2-4", s) == g);

  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    auto r = random_genotype(s, rng);
    CHECK(decode_genotype(encode_genotype(r), s) == r);
  }
}

TEST_CASE("zero-edge space decodes the empty token") {
  SearchSpace s;
  s.candidate_ops = {OpKind::zero};
  auto g = decode_genotype("", s);
  CHECK(g.size() == 0);
  CHECK(encode_genotype(g) == "");
  CHECK_THROWS_AS(decode_genotype("1", s), std::invalid_argument);
}

TEST_CASE("malformed genotype tokens report the position") {
  auto s = tiny_space(1, 3, {"zero", "skip-connect", "separable-conv-3x3",
                             "separable-conv-5x5", "avg-pool-3x3",
                             "max-pool-3x3"});  // 3 edges, 6 ops
  CHECK_THROWS_WITH_AS(decode_genotype("9-0-0", s),
                       doctest::Contains("position 0"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(decode_genotype("0-9-0", s),
                       doctest::Contains("position 2"),
                       std::invalid_argument);
  CHECK_THROWS_AS(decode_genotype("a-0-0", s), std::invalid_argument);
  CHECK_THROWS_AS(decode_genotype("0--0", s), std::invalid_argument);
  CHECK_THROWS_AS(decode_genotype("0-0", s), std::invalid_argument);
  CHECK_THROWS_AS(decode_genotype("0-0-0-0", s), std::invalid_argument);
  CHECK_THROWS_AS(decode_genotype("", s), std::invalid_argument);
  CHECK_THROWS_AS(decode_genotype("0-0-", s), std::invalid_argument);
}

TEST_CASE("space equality covers geometry and op set") {
  auto a = tiny_space(1, 3);
  auto b = tiny_space(1, 3);
  CHECK(a.same_as(b));
  auto c = tiny_space(1, 4);
  CHECK_FALSE(a.same_as(c));
  auto d = tiny_space(1, 3, {"zero", "avg-pool-3x3"});
  CHECK_FALSE(a.same_as(d));
}
