#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace ltnas {

// Row-major [rows x cols] matrix of doubles.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const {
    return v.data() + static_cast<size_t>(r) * cols;
  }
  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return v[static_cast<size_t>(r) * cols + c];
  }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// Batched feature maps, row-major [n][c][h][w].
struct Batch {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Batch() = default;
  Batch(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {}

  size_t plane() const { return static_cast<size_t>(h) * w; }
  size_t per_example() const { return static_cast<size_t>(c) * h * w; }
  size_t size() const { return v.size(); }

  double* at(int i, int ch) {
    return v.data() + (static_cast<size_t>(i) * c + ch) * plane();
  }
  const double* at(int i, int ch) const {
    return v.data() + (static_cast<size_t>(i) * c + ch) * plane();
  }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

}  // namespace ltnas
