#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pulselab/signal.hpp"

namespace pulselab {

/// min ||x~||_1  subject to  ||y - G x~||_1 <= delta  (and x~ >= 0 when
/// nonneg is set).
struct ProblemInstance {
  std::shared_ptr<const ConvolutionMatrix> G;
  std::vector<double> y;
  double delta = 0.0;
  bool nonneg = false;
  GridConfig grid;

  void validate() const;
};

/// Exact LP form of the instance, standard equality form with a slack column:
///
///   variables  z = [x+ (W) | x- (W, signed case only) | r+ (W) | r- (W) | s]
///   rows 0..W-1:  G(x+ - x-) + r+ - r- = y          (equality)
///   row W:        1'r+ + 1'r- + s = delta           (the budget inequality)
///   objective     1'(x+ + x-)
///
/// x = x+ - x-, and the residual r = y - Gx splits as r+ - r-.
struct LpDescription {
  std::vector<double> A;  // row-major m x n
  std::vector<double> b;
  std::vector<double> c;
  std::size_t m = 0;
  std::size_t n = 0;            // includes the slack column
  std::size_t structural = 0;   // 4W signed, 3W nonneg
  std::size_t eq_rows = 0;      // W
  std::size_t ineq_rows = 1;    // realized by the slack column
  std::size_t W = 0;
  bool nonneg = false;
};

LpDescription lp_reformulate(const ProblemInstance& inst);

struct SolveOptions {
  double feas_tol = 1e-9;                // relative
  std::optional<double> opt_tol;         // absolute; default 1e-8 (1+||y||_1)
  std::size_t max_iter = 100000;
};

enum class SolveStatus { optimal, max_iter, infeasible };

struct Solution {
  std::vector<double> x_hat;
  double objective = 0.0;     // ||x_hat||_1
  double residual_l1 = 0.0;   // ||y - G x_hat||_1
  double gap = 0.0;           // |primal - dual| objective gap
  std::size_t iterations = 0;
  SolveStatus status = SolveStatus::infeasible;
  // LP iterates backing the duality certificate
  std::vector<double> lp_primal;
  std::vector<double> lp_dual;
};

/// Mehrotra predictor-corrector interior-point solve of the LP form.
/// The contract is the certificate: on status optimal the duality gap is
/// below opt_tol and both feasibility residuals below feas_tol.
Solution solve(const ProblemInstance& inst, const SolveOptions& opts = {});

struct OptimalityCheck {
  double gap = 0.0;
  double primal_feas = 0.0;
  double dual_feas = 0.0;
};

/// Recomputes the duality certificate from scratch: rebuilds the LP the
/// solution was produced for and measures |c'z - b'w|, ||Az - b|| and
/// dual-slack negativity. Independent of the solver's internal state.
OptimalityCheck verify_optimality(const ProblemInstance& inst,
                                  const Solution& sol,
                                  std::span<const double> dual);

}  // namespace pulselab
