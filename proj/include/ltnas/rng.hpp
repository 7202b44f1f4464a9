#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ltnas {

uint64_t splitmix64(uint64_t x);
uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64(std::string_view s);

// Deterministic seeded random stream.  Sub-streams are derived by mixing a
// tag (plus optional indices) into the parent seed, so independent consumers
// never share generator state and results do not depend on evaluation order.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0);

  uint64_t seed() const { return seed_; }

  Rng derive(std::string_view tag) const;
  Rng derive(std::string_view tag, uint64_t a) const;
  Rng derive(std::string_view tag, uint64_t a, uint64_t b) const;

  // inclusive bounds
  int uniform_int(int lo, int hi);
  double uniform(double lo = 0.0, double hi = 1.0);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p);

  std::mt19937& gen() { return gen_; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), gen_);
  }

 private:
  uint64_t seed_ = 0;
  std::mt19937 gen_;
};

}  // namespace ltnas
