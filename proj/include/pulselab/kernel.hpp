#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pulselab/errors.hpp"

namespace pulselab {

enum class KernelFamily { gaussian, cauchy, tabulated };

/// Decay and locality constants of an admissible pulse:
///   |g^(l)(t)| <= C[l] / (1 + t^2)   for l = 0..3,
///   -g''(t) >= beta                  for |t| <= epsilon,
/// plus the peak values g(0) and g''(0).
struct AdmissibilityConstants {
  std::array<double, 4> C{};
  double epsilon = 0.0;
  double beta = 0.0;
  double g0 = 0.0;
  double g2_0 = 0.0;
};

struct AdmissibilityViolation {
  std::string clause;  // "1", "2", "3a", "3b"
  double witness;      // offending t
  std::string detail;
};

struct AdmissibilityReport {
  bool admissible = false;
  std::optional<AdmissibilityConstants> constants;
  std::optional<AdmissibilityViolation> violation;
  std::vector<std::string> warnings;
};

/// An even C^3 pulse shape. Gaussian and Cauchy use closed-form derivative
/// expressions; tabulated kernels interpolate user samples with
/// finite-difference derivative tables. Immutable and cheap to copy.
class Kernel {
 public:
  static Kernel gaussian();
  static Kernel cauchy();
  // Samples of g on a uniform grid of t values (any order, must include a
  // neighborhood of 0 after even reflection). Derivatives come from 5-point
  // stencils; everything beyond the sampled range evaluates to 0.
  static Kernel tabulated(std::span<const double> t, std::span<const double> g);

  KernelFamily family() const;
  /// g^(order)(t), order in 0..3.
  double operator()(double t, int order = 0) const;
  /// out[i] += coeff * g^(order)((t[i] - shift) * inv_scale).
  /// Vectorized for the closed-form families.
  void eval_accum(int order, std::span<const double> t, double shift,
                  double inv_scale, double coeff, std::span<double> out) const;

  /// Largest |t| covered by a tabulated kernel; +inf for the closed forms.
  double coverage() const;

  /// Global decay constants estimated once per kernel at the default scan
  /// resolution; cached, thread-safe.
  const std::array<double, 4>& global_constants() const;

  /// Conventional epsilon for this family (largest round value keeping the
  /// peak strictly concave with usable beta).
  double default_epsilon() const;

 private:
  struct Impl;
  explicit Kernel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

double eval(const Kernel& k, double t, int order);

/// C[l] = max over the grid t in [0, t_max] (step `step`) of
/// |g^(l)(t)| (1+t^2), rounded up by one grid-resolution safety margin.
/// Throws NotAdmissible (clause 2) when a maximum sits at the end of the
/// scanned range, i.e. the product has not started decaying.
std::array<double, 4> estimate_global_constants(const Kernel& k, double t_max,
                                                double step);

/// beta = min over a fine grid of [0, epsilon] of -g''(t), minus one
/// grid-resolution safety margin. Throws NotAdmissible (clause 3b, with the
/// first violating t) when g'' reaches 0 inside the interval.
double estimate_local_constants(const Kernel& k, double epsilon);

/// Runs all admissibility clauses; returns either the full constant set or
/// the first violated clause with a witness.
AdmissibilityReport check_admissible(const Kernel& k, double epsilon,
                                     double t_max = 100.0);

}  // namespace pulselab
