#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pulselab/kernel.hpp"
#include "pulselab/signal.hpp"

namespace pulselab::analysis {

/// gamma = max(N sigma, 1/epsilon)
double gamma_const(int N, double sigma, double epsilon);

/// sqrt(g(0) / (C2 + beta/4))
double epsilon_tilde(const AdmissibilityConstants& c);

struct DConstants {
  double D1 = 0.0;
  double D2 = 0.0;
  bool applicable = false;  // both D2 denominator factors strictly positive
  std::string reason;       // failing factor when not applicable
};

DConstants d_constants(const AdmissibilityConstants& c, double nu, double gamma);

/// 16 gamma^2 delta / beta
double error_bound_general(const AdmissibilityConstants& c, double gamma,
                           double delta);

struct LocalizationBound {
  double radius = 0.0;          // in grid indices
  double amplitude_threshold = 0.0;
  bool applicable = false;
  std::string reason;
};

/// Localization radius for one spike amplitude. The amplitude condition uses
/// epsilon^2, the radius formula uses epsilon_tilde^2, both exactly as the
/// theorem displays them (the mismatch is flagged in reports).
LocalizationBound localization_radius(double c_m, double delta,
                                      const AdmissibilityConstants& c,
                                      const DConstants& d, int N, double sigma,
                                      double eps_tilde);

/// 2 D2 delta / (D1 epsilon^2)
double spurious_mass_bound(const DConstants& d, double epsilon, double delta);

struct NonnegBound {
  double bound = 0.0;
  bool hypothesis_ok = false;  // N sigma > (1/2)^{1/(2r)+1} sqrt(beta/g(0))
};

/// (2 (2^r - 1)/C0) (32 C0/beta)^r gamma^{2r} delta plus the N sigma
/// hypothesis flag.
NonnegBound error_bound_nonneg(const AdmissibilityConstants& c, double gamma,
                               int r, double delta, int N, double sigma);

struct Match {
  Spike truth;
  Spike recovered;
  std::int64_t distance = 0;  // grid indices
};

struct RecoveryMetrics {
  double l1_error = 0.0;
  std::vector<Match> matched;
  std::vector<Spike> missed;
  double spurious_mass = 0.0;  // recovered mass farther than N eps sigma
                               // from every true spike
};

/// Greedy nearest matching within radius N epsilon sigma; each recovered
/// spike is used at most once. Pairs are assigned in order of increasing
/// distance (ties: lower true index first).
RecoveryMetrics compare(std::span<const double> x_hat, const SpikeTrain& truth,
                        const GridConfig& grid, double epsilon);

struct BoundsReport {
  double gamma = 0.0;
  double eps_tilde = 0.0;
  DConstants d;
  bool localization_applicable = false;
  std::string localization_reason;
  double error_bound_general = 0.0;
  std::vector<LocalizationBound> localization_radii;  // one per true spike
  double amplitude_threshold = 0.0;
  double spurious_mass_bound = 0.0;
  std::optional<NonnegBound> nonneg;  // present when r was requested
  int r = 0;
  double delta = 0.0;
  double nu = 0.0;
  double epsilon = 0.0;
};

BoundsReport make_bounds_report(const AdmissibilityConstants& c,
                                const GridConfig& grid, double nu,
                                double delta, const SpikeTrain& truth,
                                std::optional<int> rayleigh_r);

}  // namespace pulselab::analysis
