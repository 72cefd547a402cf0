#include <cmath>
#include <cstddef>

#include "pulselab/simd.hpp"
#include "kernel_math.hpp"

namespace pulselab::simd {
namespace {

double l1_norm_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::fabs(x[i]);
  return s;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double max_abs_scalar(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::fabs(x[i]);
    if (v > m) m = v;
  }
  return m;
}

void matvec_scalar(const double* A, std::size_t m, std::size_t n,
                   const double* x, double* y) {
  for (std::size_t i = 0; i < m; ++i) y[i] = dot_scalar(A + i * n, x, n);
}

void matvec_t_scalar(const double* A, std::size_t m, std::size_t n,
                     const double* x, double* y) {
  for (std::size_t j = 0; j < n; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < m; ++i) axpy_scalar(x[i], A + i * n, y, n);
}

void gram_scalar(const double* B, std::size_t m, std::size_t k, double* out) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double v = dot_scalar(B + i * k, B + j * k, k);
      out[i * m + j] = v;
      out[j * m + i] = v;
    }
  }
}

void gaussian_accum_scalar(int order, const double* t, std::size_t n,
                           double shift, double inv_scale, double coeff,
                           double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (t[i] - shift) * inv_scale;
    out[i] += coeff * detail::gaussian_deriv(x, order);
  }
}

void cauchy_accum_scalar(int order, const double* t, std::size_t n,
                         double shift, double inv_scale, double coeff,
                         double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (t[i] - shift) * inv_scale;
    out[i] += coeff * detail::cauchy_deriv(x, order);
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops table = {
      l1_norm_scalar, dot_scalar,      axpy_scalar,
      max_abs_scalar, matvec_scalar,   matvec_t_scalar,
      gram_scalar,    gaussian_accum_scalar, cauchy_accum_scalar,
  };
  return table;
}

}  // namespace pulselab::simd
