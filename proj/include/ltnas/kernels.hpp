#pragma once

#include <cstddef>

// Data-parallel inner loops used by the network engine.  Every kernel has a
// portable scalar reference implementation; on x86-64 an AVX2 variant is
// selected at runtime when the CPU supports it.  Elementwise kernels are
// bit-identical across variants; reductions may differ by accumulation order
// and are equivalence-tested under a small tolerance.  Non-x86 builds always
// use the scalar path.

namespace ltnas::kernels {

enum class SimdLevel { scalar = 0, avx2 = 1 };

// Highest level supported by the running CPU.
SimdLevel detected_level();
// Level used by the dispatching wrappers.  Defaults to detected_level();
// the LTNAS_SIMD=scalar environment variable forces the scalar path.
SimdLevel active_level();
// Requests a level; clamped to detected capability.
void set_active_level(SimdLevel level);
const char* level_name(SimdLevel level);

// ---- dispatching wrappers ----

// y += a * x
void axpy(size_t n, double a, const double* x, double* y);
// y = a * x + b
void affine(size_t n, double a, double b, const double* x, double* y);
// x *= a
void scale(size_t n, double a, double* x);
double dot(size_t n, const double* x, const double* y);
double sum(size_t n, const double* x);
// y = max(x, 0)
void relu(size_t n, const double* x, double* y);
// dx += dy where x > 0
void relu_backward(size_t n, const double* x, const double* dy, double* dx);
// v = momentum * v + g + wd * w;  w = f32round(w - lr * v)
// Parameters are kept representable in float32 so checkpoints round-trip
// bit-exactly through their 32-bit on-disk encoding.
void sgd_update(size_t n, double* w, const double* g, double* v, double lr,
                double momentum, double wd);
// population mean / variance
void mean_var(size_t n, const double* x, double* mean, double* var);

// ---- reference implementations (always available) ----

void axpy_scalar(size_t n, double a, const double* x, double* y);
void affine_scalar(size_t n, double a, double b, const double* x, double* y);
void scale_scalar(size_t n, double a, double* x);
double dot_scalar(size_t n, const double* x, const double* y);
double sum_scalar(size_t n, const double* x);
void relu_scalar(size_t n, const double* x, double* y);
void relu_backward_scalar(size_t n, const double* x, const double* dy,
                          double* dx);
void sgd_update_scalar(size_t n, double* w, const double* g, double* v,
                       double lr, double momentum, double wd);
void mean_var_scalar(size_t n, const double* x, double* mean, double* var);

#if defined(__x86_64__) || defined(_M_X64)
#define LTNAS_HAVE_AVX2 1
void axpy_avx2(size_t n, double a, const double* x, double* y);
void affine_avx2(size_t n, double a, double b, const double* x, double* y);
void scale_avx2(size_t n, double a, double* x);
double dot_avx2(size_t n, const double* x, const double* y);
double sum_avx2(size_t n, const double* x);
void relu_avx2(size_t n, const double* x, double* y);
void relu_backward_avx2(size_t n, const double* x, const double* dy,
                        double* dx);
void sgd_update_avx2(size_t n, double* w, const double* g, double* v,
                     double lr, double momentum, double wd);
void mean_var_avx2(size_t n, const double* x, double* mean, double* var);
#endif

}  // namespace ltnas::kernels
