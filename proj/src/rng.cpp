#include "ltnas/rng.hpp"

namespace ltnas {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t fnv1a64(const void* data, size_t len) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

Rng::Rng(uint64_t seed) : seed_(seed) {
  uint64_t s = splitmix64(seed);
  std::seed_seq seq{static_cast<uint32_t>(s & 0xffffffffu),
                    static_cast<uint32_t>(s >> 32)};
  gen_ = std::mt19937(seq);
}

Rng Rng::derive(std::string_view tag) const {
  return Rng(splitmix64(seed_ ^ fnv1a64(tag)));
}

Rng Rng::derive(std::string_view tag, uint64_t a) const {
  return Rng(splitmix64(splitmix64(seed_ ^ fnv1a64(tag)) + a));
}

Rng Rng::derive(std::string_view tag, uint64_t a, uint64_t b) const {
  uint64_t s = splitmix64(splitmix64(seed_ ^ fnv1a64(tag)) + a);
  return Rng(splitmix64(s + 0x9e3779b97f4a7c15ull * (b + 1)));
}

int Rng::uniform_int(int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(gen_);
}

double Rng::uniform(double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(gen_);
}

double Rng::normal(double mean, double stddev) {
  std::normal_distribution<double> d(mean, stddev);
  return d(gen_);
}

bool Rng::bernoulli(double p) {
  std::bernoulli_distribution d(p);
  return d(gen_);
}

}  // namespace ltnas
