#pragma once

// Per-element pulse derivative formulas shared by the scalar backend and the
// remainder loops of the vector backends. Keeping them in one place makes the
// scalar tail of a vector loop agree with the scalar backend bit for bit.

#include <cmath>

namespace pulselab::simd::detail {

inline double gaussian_deriv(double x, int order) {
  const double e = std::exp(-0.5 * x * x);
  switch (order) {
    case 0: return e;
    case 1: return -x * e;
    case 2: return (x * x - 1.0) * e;
    default: return x * (3.0 - x * x) * e;  // order 3
  }
}

inline double cauchy_deriv(double x, int order) {
  const double u = 1.0 / (1.0 + x * x);
  switch (order) {
    case 0: return u;
    case 1: return -2.0 * x * u * u;
    case 2: return (6.0 * x * x - 2.0) * u * u * u;
    default: return 24.0 * x * (1.0 - x * x) * u * u * u * u;  // order 3
  }
}

}  // namespace pulselab::simd::detail
