#pragma once

#include <cstddef>
#include <string_view>

namespace pulselab::simd {

enum class Backend { scalar = 0, avx2 = 1 };

/// Table of the vectorizable primitives the library's inner loops run on.
/// One table per backend; all entries behave identically up to floating-point
/// rounding (see tests/test_simd.cpp for the equivalence tolerances).
struct Ops {
  double (*l1_norm)(const double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*max_abs)(const double* x, std::size_t n);
  // y = A x, A row-major m x n
  void (*matvec)(const double* A, std::size_t m, std::size_t n, const double* x,
                 double* y);
  // y = A^T x, A row-major m x n, y length n
  void (*matvec_t)(const double* A, std::size_t m, std::size_t n,
                   const double* x, double* y);
  // out = B B^T, B row-major m x k, out m x m (full symmetric fill)
  void (*gram)(const double* B, std::size_t m, std::size_t k, double* out);
  // out[i] += coeff * g^(order)((t[i] - shift) * inv_scale) for the unit
  // Gaussian pulse exp(-t^2/2); order in 0..3
  void (*gaussian_accum)(int order, const double* t, std::size_t n,
                         double shift, double inv_scale, double coeff,
                         double* out);
  // same for the Cauchy pulse 1/(1+t^2)
  void (*cauchy_accum)(int order, const double* t, std::size_t n, double shift,
                       double inv_scale, double coeff, double* out);
};

// Backend chosen at startup: CPU sniffing, overridable with
// PULSELAB_SIMD=scalar|avx2|auto.
Backend active_backend();
void set_backend(Backend b);  // test hook; throws if b is unavailable
bool available(Backend b);
std::string_view name(Backend b);

const Ops& ops();                 // table for the active backend
const Ops& ops_for(Backend b);    // specific table (equivalence tests)

}  // namespace pulselab::simd
