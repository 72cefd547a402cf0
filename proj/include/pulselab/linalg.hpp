#pragma once

#include <cstddef>
#include <vector>

namespace pulselab::linalg {

// Dense row-major helpers sized for this project's systems: certificate
// interpolation (tens of unknowns) and interior-point normal equations
// (window-sized, SPD).

struct LuFactors {
  std::vector<double> lu;
  std::vector<int> piv;
  std::size_t n = 0;
  bool singular = false;
};

LuFactors lu_factor(std::vector<double> a, std::size_t n);
void lu_solve(const LuFactors& f, double* b);
std::vector<double> lu_invert(const LuFactors& f);

/// Solve A x = b with one step of iterative refinement; `a` is the original
/// matrix, `f` its factorization. x holds b on entry, the solution on exit.
void lu_solve_refined(const std::vector<double>& a, const LuFactors& f,
                      double* x);

double matrix_norm1(const double* a, std::size_t n);
/// 1-norm condition estimate via the explicit inverse; +inf when singular.
double condition_1(const std::vector<double>& a, std::size_t n);

/// In-place lower Cholesky of a row-major SPD matrix. Returns false when a
/// pivot drops below `pivot_floor`.
bool cholesky(double* a, std::size_t n, double pivot_floor = 0.0);
/// Cholesky with static pivot perturbation: a pivot that cancels below
/// rel_floor times its row's original diagonal is replaced by a huge value
/// (dropping that row from the factor). Returns the number of drops.
std::size_t cholesky_clamped(double* a, std::size_t n, double rel_floor);
void cholesky_solve(const double* L, std::size_t n, double* b);

}  // namespace pulselab::linalg
