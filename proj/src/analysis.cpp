#include "pulselab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pulselab::analysis {

namespace {
constexpr double kPi2 = std::numbers::pi * std::numbers::pi;
}

double gamma_const(int N, double sigma, double epsilon) {
  if (N <= 0 || !(sigma > 0.0) || !(epsilon > 0.0))
    throw std::invalid_argument("gamma_const: inputs must be positive");
  return std::max(static_cast<double>(N) * sigma, 1.0 / epsilon);
}

double epsilon_tilde(const AdmissibilityConstants& c) {
  return std::sqrt(c.g0 / (c.C[2] + c.beta / 4.0));
}

DConstants d_constants(const AdmissibilityConstants& c, double nu,
                       double gamma) {
  if (!(nu > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("d_constants: nu and gamma must be positive");
  DConstants d;
  d.D1 = c.beta / (4.0 * c.g0);
  const double f1 = 3.0 * std::fabs(c.g2_0) * nu * nu - kPi2 * c.C[2];
  const double f2 = 3.0 * c.g0 * nu * nu - 2.0 * kPi2 * c.C[0];
  if (f1 <= 0.0) {
    d.reason = "3|g''(0)|nu^2 = " + std::to_string(3.0 * std::fabs(c.g2_0) * nu * nu) +
               " not above pi^2 C2 = " + std::to_string(kPi2 * c.C[2]);
    return d;
  }
  if (f2 <= 0.0) {
    d.reason = "3 g(0) nu^2 = " + std::to_string(3.0 * c.g0 * nu * nu) +
               " not above 2 pi^2 C0 = " + std::to_string(2.0 * kPi2 * c.C[0]);
    return d;
  }
  const double num = 3.0 * nu * nu * f1 +
                     (16.0 * c.C[1] * c.C[1] * gamma * gamma * kPi2 / c.beta) *
                         (1.0 + kPi2 / (6.0 * nu * nu));
  d.D2 = num / (f1 * f2);
  d.applicable = true;
  return d;
}

double error_bound_general(const AdmissibilityConstants& c, double gamma,
                           double delta) {
  if (delta < 0.0) throw std::invalid_argument("error_bound_general: delta < 0");
  return 16.0 * gamma * gamma * delta / c.beta;
}

LocalizationBound localization_radius(double c_m, double delta,
                                      const AdmissibilityConstants& c,
                                      const DConstants& d, int N, double sigma,
                                      double eps_tilde) {
  LocalizationBound out;
  if (!d.applicable) {
    out.reason = "D2 not applicable: " + d.reason;
    return out;
  }
  if (c.epsilon < eps_tilde) {
    out.reason = "epsilon < epsilon_tilde: localization hypothesis not met";
    return out;
  }
  const double Ns = static_cast<double>(N) * sigma;
  const double m_cond =
      std::max(1.0 / (d.D1 * c.epsilon * c.epsilon),
               4.0 * c.C[2] / (Ns * Ns * c.beta));
  out.amplitude_threshold = 2.0 * delta * d.D2 * (1.0 + m_cond);
  if (std::fabs(c_m) < out.amplitude_threshold) {
    out.reason = "amplitude below threshold";
    return out;
  }
  const double m_bound = std::max(1.0 / (d.D1 * eps_tilde * eps_tilde),
                                  4.0 * c.C[2] / (Ns * Ns * c.beta));
  const double denom =
      d.D1 * (std::fabs(c_m) - 2.0 * delta * d.D2 * (1.0 + m_bound));
  if (!(denom > 0.0)) {
    out.reason = "amplitude below the bound's own threshold";
    return out;
  }
  out.radius = Ns * std::sqrt(2.0 * d.D2 * delta / denom);
  out.applicable = true;
  return out;
}

double spurious_mass_bound(const DConstants& d, double epsilon, double delta) {
  if (!d.applicable)
    throw std::invalid_argument("spurious_mass_bound: D2 not applicable");
  return 2.0 * d.D2 * delta / (d.D1 * epsilon * epsilon);
}

NonnegBound error_bound_nonneg(const AdmissibilityConstants& c, double gamma,
                               int r, double delta, int N, double sigma) {
  if (r < 1) throw std::invalid_argument("error_bound_nonneg: r must be >= 1");
  if (delta < 0.0) throw std::invalid_argument("error_bound_nonneg: delta < 0");
  NonnegBound out;
  const double rr = static_cast<double>(r);
  out.bound = (2.0 * (std::pow(2.0, rr) - 1.0) / c.C[0]) *
              std::pow(32.0 * c.C[0] / c.beta, rr) *
              std::pow(gamma, 2.0 * rr) * delta;
  const double rhs =
      std::pow(0.5, 1.0 / (2.0 * rr) + 1.0) * std::sqrt(c.beta / c.g0);
  out.hypothesis_ok = static_cast<double>(N) * sigma > rhs;
  return out;
}

RecoveryMetrics compare(std::span<const double> x_hat, const SpikeTrain& truth,
                        const GridConfig& grid, double epsilon) {
  if (x_hat.size() != grid.window())
    throw std::invalid_argument("compare: vector does not match grid");
  RecoveryMetrics out;

  // l1 error against the truth expanded onto the grid
  {
    std::vector<double> t(grid.window(), 0.0);
    for (const Spike& s : truth.entries)
      t[static_cast<std::size_t>(s.k - grid.k_min)] = s.c;
    for (std::size_t i = 0; i < t.size(); ++i)
      out.l1_error += std::fabs(x_hat[i] - t[i]);
  }

  const SpikeTrain rec = extract_spikes(x_hat, grid);
  const double radius = static_cast<double>(grid.N) * epsilon * grid.sigma;

  // all candidate pairs within the matching radius, closest first
  struct Pair {
    std::int64_t dist;
    std::size_t ti, ri;
  };
  std::vector<Pair> pairs;
  for (std::size_t ti = 0; ti < truth.entries.size(); ++ti)
    for (std::size_t ri = 0; ri < rec.entries.size(); ++ri) {
      const std::int64_t dist =
          std::llabs(truth.entries[ti].k - rec.entries[ri].k);
      if (static_cast<double>(dist) <= radius) pairs.push_back({dist, ti, ri});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.ti != b.ti) return a.ti < b.ti;
    return a.ri < b.ri;
  });
  std::vector<bool> t_used(truth.entries.size(), false);
  std::vector<bool> r_used(rec.entries.size(), false);
  for (const Pair& p : pairs) {
    if (t_used[p.ti] || r_used[p.ri]) continue;
    t_used[p.ti] = true;
    r_used[p.ri] = true;
    out.matched.push_back({truth.entries[p.ti], rec.entries[p.ri], p.dist});
  }
  for (std::size_t ti = 0; ti < truth.entries.size(); ++ti)
    if (!t_used[ti]) out.missed.push_back(truth.entries[ti]);

  // spurious mass: recovered spikes farther than the radius from every truth
  for (const Spike& r : rec.entries) {
    bool near = false;
    for (const Spike& t : truth.entries)
      if (static_cast<double>(std::llabs(r.k - t.k)) <= radius) {
        near = true;
        break;
      }
    if (!near) out.spurious_mass += std::fabs(r.c);
  }
  return out;
}

BoundsReport make_bounds_report(const AdmissibilityConstants& c,
                                const GridConfig& grid, double nu,
                                double delta, const SpikeTrain& truth,
                                std::optional<int> rayleigh_r) {
  BoundsReport rep;
  rep.nu = nu;
  rep.delta = delta;
  rep.epsilon = c.epsilon;
  rep.gamma = gamma_const(grid.N, grid.sigma, c.epsilon);
  rep.eps_tilde = epsilon_tilde(c);
  rep.d = d_constants(c, nu, rep.gamma);
  rep.error_bound_general = error_bound_general(c, rep.gamma, delta);
  rep.localization_applicable = rep.d.applicable && c.epsilon >= rep.eps_tilde;
  if (!rep.d.applicable)
    rep.localization_reason = rep.d.reason;
  else if (c.epsilon < rep.eps_tilde)
    rep.localization_reason = "epsilon < epsilon_tilde: hypothesis not met";
  for (const Spike& s : truth.entries) {
    const LocalizationBound lb = localization_radius(
        s.c, delta, c, rep.d, grid.N, grid.sigma, rep.eps_tilde);
    rep.amplitude_threshold = lb.amplitude_threshold;
    rep.localization_radii.push_back(lb);
  }
  if (rep.d.applicable)
    rep.spurious_mass_bound = spurious_mass_bound(rep.d, c.epsilon, delta);
  if (rayleigh_r) {
    rep.r = *rayleigh_r;
    rep.nonneg =
        error_bound_nonneg(c, rep.gamma, rep.r, delta, grid.N, grid.sigma);
  }
  return rep;
}

}  // namespace pulselab::analysis
