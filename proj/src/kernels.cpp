#include "ltnas/kernels.hpp"

#include <cstdlib>
#include <cstring>

#if defined(LTNAS_HAVE_AVX2)
#include <immintrin.h>
#endif

namespace ltnas::kernels {

// ============================ dispatch ============================

SimdLevel detected_level() {
#if defined(LTNAS_HAVE_AVX2)
  static const SimdLevel lvl =
      __builtin_cpu_supports("avx2") ? SimdLevel::avx2 : SimdLevel::scalar;
  return lvl;
#else
  return SimdLevel::scalar;
#endif
}

namespace {

SimdLevel initial_level() {
  const char* env = std::getenv("LTNAS_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) return SimdLevel::scalar;
  return detected_level();
}

SimdLevel g_level = initial_level();

}  // namespace

SimdLevel active_level() { return g_level; }

void set_active_level(SimdLevel level) {
  g_level = (level == SimdLevel::avx2 && detected_level() == SimdLevel::avx2)
                ? SimdLevel::avx2
                : SimdLevel::scalar;
}

const char* level_name(SimdLevel level) {
  return level == SimdLevel::avx2 ? "avx2" : "scalar";
}

// ====================== scalar reference kernels ======================

void axpy_scalar(size_t n, double a, const double* x, double* y) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void affine_scalar(size_t n, double a, double b, const double* x, double* y) {
  for (size_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

void scale_scalar(size_t n, double a, double* x) {
  for (size_t i = 0; i < n; ++i) x[i] *= a;
}

double dot_scalar(size_t n, const double* x, const double* y) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_scalar(size_t n, const double* x) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void relu_scalar(size_t n, const double* x, double* y) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(size_t n, const double* x, const double* dy,
                          double* dx) {
  for (size_t i = 0; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

void sgd_update_scalar(size_t n, double* w, const double* g, double* v,
                       double lr, double momentum, double wd) {
  for (size_t i = 0; i < n; ++i) {
    v[i] = momentum * v[i] + g[i] + wd * w[i];
    w[i] = static_cast<double>(static_cast<float>(w[i] - lr * v[i]));
  }
}

void mean_var_scalar(size_t n, const double* x, double* mean, double* var) {
  if (n == 0) {
    *mean = 0.0;
    *var = 0.0;
    return;
  }
  double m = sum_scalar(n, x) / static_cast<double>(n);
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = x[i] - m;
    acc += d * d;
  }
  *mean = m;
  *var = acc / static_cast<double>(n);
}

// ========================== AVX2 kernels ==========================

#if defined(LTNAS_HAVE_AVX2)

// AVX2 variants mirror the scalar operation order per element (multiply then
// add, no FMA contraction) so elementwise kernels stay bit-identical to the
// reference; reductions use vector accumulators and may differ in the last
// few ulps.

__attribute__((target("avx2"))) void axpy_avx2(size_t n, double a,
                                               const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    __m256d vx = _mm256_loadu_pd(x + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, vx));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

__attribute__((target("avx2"))) void affine_avx2(size_t n, double a, double b,
                                                 const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_mul_pd(va, vx), vb));
  }
  for (; i < n; ++i) y[i] = a * x[i] + b;
}

__attribute__((target("avx2"))) void scale_avx2(size_t n, double a,
                                                double* x) {
  const __m256d va = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

__attribute__((target("avx2"))) double dot_avx2(size_t n, const double* x,
                                                const double* y) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(
        acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  double lanes[4];
  _mm256_storeu_pd(lanes, acc);
  double r = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]));
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

__attribute__((target("avx2"))) double sum_avx2(size_t n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double lanes[4];
  _mm256_storeu_pd(lanes, acc);
  double r = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]));
  for (; i < n; ++i) r += x[i];
  return r;
}

__attribute__((target("avx2"))) void relu_avx2(size_t n, const double* x,
                                               double* y) {
  const __m256d zero = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

__attribute__((target("avx2"))) void relu_backward_avx2(size_t n,
                                                        const double* x,
                                                        const double* dy,
                                                        double* dx) {
  const __m256d zero = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d mask = _mm256_cmp_pd(vx, zero, _CMP_GT_OQ);
    __m256d add = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), add));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

__attribute__((target("avx2"))) void sgd_update_avx2(size_t n, double* w,
                                                     const double* g,
                                                     double* v, double lr,
                                                     double momentum,
                                                     double wd) {
  const __m256d vmom = _mm256_set1_pd(momentum);
  const __m256d vwd = _mm256_set1_pd(wd);
  const __m256d vlr = _mm256_set1_pd(lr);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vw = _mm256_loadu_pd(w + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vv = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(vmom, vv),
                                     _mm256_loadu_pd(g + i)),
                       _mm256_mul_pd(vwd, vw));
    _mm256_storeu_pd(v + i, vv);
    vw = _mm256_sub_pd(vw, _mm256_mul_pd(vlr, vv));
    __m128 f = _mm256_cvtpd_ps(vw);
    _mm256_storeu_pd(w + i, _mm256_cvtps_pd(f));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] + g[i] + wd * w[i];
    w[i] = static_cast<double>(static_cast<float>(w[i] - lr * v[i]));
  }
}

__attribute__((target("avx2"))) void mean_var_avx2(size_t n, const double* x,
                                                   double* mean, double* var) {
  if (n == 0) {
    *mean = 0.0;
    *var = 0.0;
    return;
  }
  double m = sum_avx2(n, x) / static_cast<double>(n);
  const __m256d vm = _mm256_set1_pd(m);
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double lanes[4];
  _mm256_storeu_pd(lanes, acc);
  double r = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]));
  for (; i < n; ++i) {
    double d = x[i] - m;
    r += d * d;
  }
  *mean = m;
  *var = r / static_cast<double>(n);
}

#endif  // LTNAS_HAVE_AVX2

// ====================== dispatching wrappers ======================

#if defined(LTNAS_HAVE_AVX2)
#define LTNAS_DISPATCH(fn, ...)                                  \
  do {                                                           \
    if (g_level == SimdLevel::avx2) return fn##_avx2(__VA_ARGS__); \
    return fn##_scalar(__VA_ARGS__);                             \
  } while (0)
#else
#define LTNAS_DISPATCH(fn, ...) return fn##_scalar(__VA_ARGS__)
#endif

void axpy(size_t n, double a, const double* x, double* y) {
  LTNAS_DISPATCH(axpy, n, a, x, y);
}
void affine(size_t n, double a, double b, const double* x, double* y) {
  LTNAS_DISPATCH(affine, n, a, b, x, y);
}
void scale(size_t n, double a, double* x) { LTNAS_DISPATCH(scale, n, a, x); }
double dot(size_t n, const double* x, const double* y) {
  LTNAS_DISPATCH(dot, n, x, y);
}
double sum(size_t n, const double* x) { LTNAS_DISPATCH(sum, n, x); }
void relu(size_t n, const double* x, double* y) {
  LTNAS_DISPATCH(relu, n, x, y);
}
void relu_backward(size_t n, const double* x, const double* dy, double* dx) {
  LTNAS_DISPATCH(relu_backward, n, x, dy, dx);
}
void sgd_update(size_t n, double* w, const double* g, double* v, double lr,
                double momentum, double wd) {
  LTNAS_DISPATCH(sgd_update, n, w, g, v, lr, momentum, wd);
}
void mean_var(size_t n, const double* x, double* mean, double* var) {
  LTNAS_DISPATCH(mean_var, n, x, mean, var);
}

#undef LTNAS_DISPATCH

}  // namespace ltnas::kernels
