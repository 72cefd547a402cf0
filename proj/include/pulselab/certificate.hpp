#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pulselab/kernel.hpp"

namespace pulselab {

/// Interpolating function q(t) = sum_m a_m g_sigma(t - t_m)
///                              + b_m g_sigma^(1)(t - t_m)
/// with q(t_m) = v_m and q'(t_m) = 0; |q| < 1 away from the support
/// certifies uniqueness of the l1 minimizer on that support.
struct DualCertificate {
  std::vector<double> support;              // strictly increasing times
  std::vector<int> signs;                   // +-1
  std::vector<std::pair<double, double>> coeffs;  // (a_m, b_m)
  double sigma = 1.0;
  Kernel kernel = Kernel::gaussian();
  double interp_residual = 0.0;       // max_m |q(t_m) - v_m|
  double stationarity_residual = 0.0; // max_m |q'(t_m)|
};

/// Solves the 2M x 2M interpolation system. Throws ConstructionFailed when
/// the system's 1-norm condition exceeds 1e12.
DualCertificate construct(const Kernel& kernel, std::span<const double> support,
                          std::span<const int> signs, double sigma);

/// q^(order)(t) for order 0..1.
double evaluate_q(const DualCertificate& cert, double t, int order);

struct CertificateVerdict {
  double interp_residual = 0.0;
  double stationarity_residual = 0.0;
  /// max |q(t)| over scan points farther than epsilon*sigma from every t_m
  double max_offsupport = 0.0;
  /// max |q(t)| over scan points within epsilon*sigma of a t_m but outside
  /// the scan_step exemption around it
  double max_near_support = 0.0;
  bool concavity_ok = false;  // v_m q''(t_m) < 0 at every support point
  double tail_bound = 0.0;    // analytic |q| bound beyond the scan range
  double margin = 0.0;        // 1 - max_offsupport
  bool valid = false;
};

/// Dense-scan verification of the Theorem conditions. Points within
/// scan_step of a support point are exempt from the strict |q| < 1 check
/// (|q(t_m)| = 1 by construction); the sign-consistent concavity check
/// covers them. Beyond scan_radius the decay constants bound |q| analytically.
/// Preconditions: scan_step <= sigma/100, scan_radius >= 10 sigma.
CertificateVerdict verify(const DualCertificate& cert, double epsilon,
                          double scan_step, double scan_radius);

struct NuSweepConfig {
  int M_max = 6;                 // all 2^M sign patterns for M <= 6,
                                 // alternating + all-equal above
  std::vector<double> nu_grid;   // increasing candidate separations
  double sigma = 1.0;
  double epsilon = 0.0;          // 0 = kernel default
  double refine_tol = 1e-3;      // bisection resolution
};

/// Smallest nu in the grid (bisection-refined) such that certificates exist
/// and verify for equispaced supports at spacing nu*sigma under every tested
/// spike count and sign pattern. Empty when no grid value succeeds.
std::optional<double> minimal_empirical_nu(const Kernel& kernel,
                                           const NuSweepConfig& config);

}  // namespace pulselab
