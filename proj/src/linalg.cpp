#include "pulselab/linalg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pulselab/simd.hpp"

namespace pulselab::linalg {

LuFactors lu_factor(std::vector<double> a, std::size_t n) {
  if (a.size() != n * n) throw std::invalid_argument("lu_factor: bad size");
  LuFactors f;
  f.piv.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::fabs(a[k * n + k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::fabs(a[i * n + k]);
      if (v > best) {
        best = v;
        p = i;
      }
    }
    f.piv[k] = static_cast<int>(p);
    if (best == 0.0) {
      f.singular = true;
      break;
    }
    if (p != k)
      for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
    const double inv = 1.0 / a[k * n + k];
    for (std::size_t i = k + 1; i < n; ++i) {
      const double m = a[i * n + k] * inv;
      a[i * n + k] = m;
      if (m != 0.0)
        simd::ops().axpy(-m, &a[k * n + k + 1], &a[i * n + k + 1], n - k - 1);
    }
  }
  f.lu = std::move(a);
  f.n = n;
  return f;
}

void lu_solve(const LuFactors& f, double* b) {
  if (f.singular) throw std::runtime_error("lu_solve: singular matrix");
  const std::size_t n = f.n;
  const auto& lu = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t p = static_cast<std::size_t>(f.piv[k]);
    if (p != k) std::swap(b[k], b[p]);
    for (std::size_t i = k + 1; i < n; ++i) b[i] -= lu[i * n + k] * b[k];
  }
  for (std::size_t k = n; k-- > 0;) {
    b[k] /= lu[k * n + k];
    for (std::size_t i = 0; i < k; ++i) b[i] -= lu[i * n + k] * b[k];
  }
}

std::vector<double> lu_invert(const LuFactors& f) {
  const std::size_t n = f.n;
  std::vector<double> inv(n * n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    lu_solve(f, col.data());
    for (std::size_t i = 0; i < n; ++i) inv[i * n + j] = col[i];
  }
  return inv;
}

void lu_solve_refined(const std::vector<double>& a, const LuFactors& f,
                      double* x) {
  const std::size_t n = f.n;
  std::vector<double> rhs(x, x + n), r(n);
  lu_solve(f, x);
  simd::ops().matvec(a.data(), n, n, x, r.data());
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
  lu_solve(f, r.data());
  for (std::size_t i = 0; i < n; ++i) x[i] += r[i];
}

double matrix_norm1(const double* a, std::size_t n) {
  double best = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::fabs(a[i * n + j]);
    best = std::max(best, s);
  }
  return best;
}

double condition_1(const std::vector<double>& a, std::size_t n) {
  LuFactors f = lu_factor(a, n);
  if (f.singular) return std::numeric_limits<double>::infinity();
  const std::vector<double> inv = lu_invert(f);
  return matrix_norm1(a.data(), n) * matrix_norm1(inv.data(), n);
}

bool cholesky(double* a, std::size_t n, double pivot_floor) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double s = simd::ops().dot(a + i * n, a + j * n, i);
      const double v = a[j * n + i] - s;
      if (j == i) {
        if (!(v > pivot_floor)) return false;
        a[i * n + i] = std::sqrt(v);
      } else {
        a[j * n + i] = v / a[i * n + i];
      }
    }
    for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
  }
  return true;
}

std::size_t cholesky_clamped(double* a, std::size_t n, double rel_floor) {
  // Static pivot perturbation for near-singular SPD systems: a pivot that
  // cancels down to roundoff relative to its own original diagonal is
  // replaced by a huge value, which zeroes the rest of its column and
  // effectively drops the row from the factored system (the caller refines
  // against the true matrix). The floor is per-row: a uniformly tiny row is
  // valid data, not cancellation. Returns the number of dropped pivots.
  std::size_t dropped = 0;
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a[i * n + i];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double s = simd::ops().dot(a + i * n, a + j * n, i);
      double v = a[j * n + i] - s;
      if (j == i) {
        if (!(v > rel_floor * diag[i])) {
          v = 1e128;
          ++dropped;
        }
        a[i * n + i] = std::sqrt(v);
      } else {
        a[j * n + i] = v / a[i * n + i];
      }
    }
    for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
  }
  return dropped;
}

void cholesky_solve(const double* L, std::size_t n, double* b) {
  for (std::size_t i = 0; i < n; ++i)
    b[i] = (b[i] - simd::ops().dot(L + i * n, b, i)) / L[i * n + i];
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= L[j * n + i] * b[j];
    b[i] = s / L[i * n + i];
  }
}

}  // namespace pulselab::linalg
