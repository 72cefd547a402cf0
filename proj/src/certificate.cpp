#include "pulselab/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pulselab/linalg.hpp"
#include "pulselab/simd.hpp"

namespace pulselab {

namespace {

// q^(order) at one point; order up to 2 internally (verify needs q'')
double q_eval(const DualCertificate& cert, double t, int order) {
  const double inv = 1.0 / cert.sigma;
  double acc = 0.0;
  for (std::size_t m = 0; m < cert.support.size(); ++m) {
    const double u = (t - cert.support[m]) * inv;
    const auto [a, b] = cert.coeffs[m];
    acc += a * cert.kernel(u, order) * std::pow(inv, order);
    acc += b * cert.kernel(u, order + 1) * std::pow(inv, order + 1);
  }
  return acc;
}

// q^(order) on a batch of points, accumulated through the SIMD table
void q_eval_batch(const DualCertificate& cert, std::span<const double> ts,
                  int order, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const double inv = 1.0 / cert.sigma;
  for (std::size_t m = 0; m < cert.support.size(); ++m) {
    const auto [a, b] = cert.coeffs[m];
    cert.kernel.eval_accum(order, ts, cert.support[m], inv,
                           a * std::pow(inv, order), out);
    cert.kernel.eval_accum(order + 1, ts, cert.support[m], inv,
                           b * std::pow(inv, order + 1), out);
  }
}

}  // namespace

DualCertificate construct(const Kernel& kernel, std::span<const double> support,
                          std::span<const int> signs, double sigma) {
  const std::size_t M = support.size();
  if (M == 0) throw std::invalid_argument("construct: empty support");
  if (signs.size() != M) throw std::invalid_argument("construct: |signs| != |support|");
  if (!(sigma > 0.0)) throw std::invalid_argument("construct: sigma must be > 0");
  for (std::size_t i = 0; i < M; ++i) {
    if (signs[i] != 1 && signs[i] != -1)
      throw std::invalid_argument("construct: signs must be +-1");
    if (i > 0 && !(support[i] > support[i - 1]))
      throw std::invalid_argument("construct: support must be strictly increasing");
  }

  // rows: q(t_n) = v_n, then q'(t_n) = 0; columns: a_m then b_m
  const std::size_t dim = 2 * M;
  const double inv = 1.0 / sigma;
  std::vector<double> K(dim * dim);
  for (std::size_t n = 0; n < M; ++n) {
    for (std::size_t m = 0; m < M; ++m) {
      const double u = (support[n] - support[m]) * inv;
      K[n * dim + m] = kernel(u, 0);
      K[n * dim + M + m] = kernel(u, 1) * inv;
      K[(M + n) * dim + m] = kernel(u, 1) * inv;
      K[(M + n) * dim + M + m] = kernel(u, 2) * inv * inv;
    }
  }

  const double cond = linalg::condition_1(K, dim);
  if (!(cond < 1e12))
    throw ConstructionFailed(cond, "certificate system condition " +
                                       std::to_string(cond) + " exceeds 1e12");

  std::vector<double> rhs(dim, 0.0);
  for (std::size_t n = 0; n < M; ++n) rhs[n] = static_cast<double>(signs[n]);
  linalg::LuFactors f = linalg::lu_factor(K, dim);
  linalg::lu_solve_refined(K, f, rhs.data());

  DualCertificate cert;
  cert.support.assign(support.begin(), support.end());
  cert.signs.assign(signs.begin(), signs.end());
  cert.coeffs.resize(M);
  for (std::size_t m = 0; m < M; ++m) cert.coeffs[m] = {rhs[m], rhs[M + m]};
  cert.sigma = sigma;
  cert.kernel = kernel;
  for (std::size_t n = 0; n < M; ++n) {
    cert.interp_residual =
        std::max(cert.interp_residual,
                 std::fabs(q_eval(cert, support[n], 0) - signs[n]));
    cert.stationarity_residual = std::max(
        cert.stationarity_residual, std::fabs(q_eval(cert, support[n], 1)));
  }
  return cert;
}

double evaluate_q(const DualCertificate& cert, double t, int order) {
  if (order < 0 || order > 1)
    throw std::invalid_argument("evaluate_q: order must be 0 or 1");
  return q_eval(cert, t, order);
}

CertificateVerdict verify(const DualCertificate& cert, double epsilon,
                          double scan_step, double scan_radius) {
  const double sigma = cert.sigma;
  if (!(scan_step > 0.0) || scan_step > sigma / 100.0)
    throw std::invalid_argument("verify: scan_step must be in (0, sigma/100]");
  if (scan_radius < 10.0 * sigma)
    throw std::invalid_argument("verify: scan_radius must be >= 10 sigma");
  if (!(epsilon > 0.0)) throw std::invalid_argument("verify: epsilon must be > 0");

  CertificateVerdict v;
  v.interp_residual = cert.interp_residual;
  v.stationarity_residual = cert.stationarity_residual;

  // sign-consistent concavity at each support point
  v.concavity_ok = true;
  for (std::size_t m = 0; m < cert.support.size(); ++m) {
    const double q2 = q_eval(cert, cert.support[m], 2);
    if (!(static_cast<double>(cert.signs[m]) * q2 < 0.0)) v.concavity_ok = false;
  }

  const double lo = cert.support.front() - scan_radius;
  const double hi = cert.support.back() + scan_radius;
  const std::size_t npts =
      static_cast<std::size_t>(std::ceil((hi - lo) / scan_step)) + 1;
  const double eps_nbhd = epsilon * sigma;

  constexpr std::size_t kChunk = 4096;
  std::vector<double> ts(kChunk), qs(kChunk);
  for (std::size_t base = 0; base < npts; base += kChunk) {
    const std::size_t mchunk = std::min(kChunk, npts - base);
    for (std::size_t i = 0; i < mchunk; ++i)
      ts[i] = lo + static_cast<double>(base + i) * scan_step;
    q_eval_batch(cert, std::span(ts).first(mchunk), 0,
                 std::span(qs).first(mchunk));
    for (std::size_t i = 0; i < mchunk; ++i) {
      double dist = std::numeric_limits<double>::infinity();
      for (const double tm : cert.support)
        dist = std::min(dist, std::fabs(ts[i] - tm));
      if (dist <= scan_step) continue;  // exempt; concavity covers it
      const double a = std::fabs(qs[i]);
      if (dist > eps_nbhd) {
        v.max_offsupport = std::max(v.max_offsupport, a);
      } else {
        v.max_near_support = std::max(v.max_near_support, a);
      }
    }
  }

  // beyond the scan: |q| <= sum_m (|a_m| C0 + |b_m| C1/sigma) / (1+d_m^2/s^2)
  // evaluated at the scan edges, decreasing farther out
  {
    const auto& C = cert.kernel.global_constants();
    double worst = 0.0;
    for (const double edge : {lo, hi}) {
      double s = 0.0;
      for (std::size_t m = 0; m < cert.support.size(); ++m) {
        const double dm = std::fabs(edge - cert.support[m]) / sigma;
        const auto [a, b] = cert.coeffs[m];
        s += (std::fabs(a) * C[0] + std::fabs(b) * C[1] / sigma) /
             (1.0 + dm * dm);
      }
      worst = std::max(worst, s);
    }
    v.tail_bound = worst;
  }

  v.margin = 1.0 - v.max_offsupport;
  v.valid = v.interp_residual <= 1e-8 && v.stationarity_residual <= 1e-8 &&
            v.max_offsupport < 1.0 && v.max_near_support < 1.0 &&
            v.concavity_ok && v.tail_bound < 1.0;
  return v;
}

namespace {

bool nu_works(const Kernel& kernel, double nu, const NuSweepConfig& cfg,
              double epsilon) {
  const double sigma = cfg.sigma;
  const double step = sigma / 100.0;
  const double radius = 10.0 * sigma;
  for (int M = 1; M <= cfg.M_max; ++M) {
    std::vector<double> support(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m)
      support[static_cast<std::size_t>(m)] = static_cast<double>(m) * nu * sigma;
    std::vector<std::vector<int>> patterns;
    if (M <= 6) {
      for (unsigned bits = 0; bits < (1u << M); ++bits) {
        std::vector<int> p(static_cast<std::size_t>(M));
        for (int m = 0; m < M; ++m) p[static_cast<std::size_t>(m)] = (bits >> m) & 1u ? 1 : -1;
        patterns.push_back(std::move(p));
      }
    } else {
      std::vector<int> alt(static_cast<std::size_t>(M)), same(static_cast<std::size_t>(M), 1);
      for (int m = 0; m < M; ++m) alt[static_cast<std::size_t>(m)] = m % 2 == 0 ? 1 : -1;
      patterns.push_back(std::move(alt));
      patterns.push_back(std::move(same));
    }
    for (const auto& p : patterns) {
      try {
        const DualCertificate cert = construct(kernel, support, p, sigma);
        if (!verify(cert, epsilon, step, radius).valid) return false;
      } catch (const ConstructionFailed&) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

std::optional<double> minimal_empirical_nu(const Kernel& kernel,
                                           const NuSweepConfig& config) {
  if (config.nu_grid.empty())
    throw std::invalid_argument("minimal_empirical_nu: empty nu grid");
  for (std::size_t i = 1; i < config.nu_grid.size(); ++i)
    if (!(config.nu_grid[i] > config.nu_grid[i - 1]) || !(config.nu_grid[0] > 0.0))
      throw std::invalid_argument("minimal_empirical_nu: grid must be increasing and positive");
  const double epsilon =
      config.epsilon > 0.0 ? config.epsilon : kernel.default_epsilon();

  std::optional<double> lo_fail;
  std::optional<double> hi_ok;
  for (const double nu : config.nu_grid) {
    if (nu_works(kernel, nu, config, epsilon)) {
      hi_ok = nu;
      break;
    }
    lo_fail = nu;
  }
  if (!hi_ok) return std::nullopt;
  if (!lo_fail) return hi_ok;  // first grid point already works

  double lo = *lo_fail, hi = *hi_ok;
  while (hi - lo > config.refine_tol) {
    const double mid = 0.5 * (lo + hi);
    if (nu_works(kernel, mid, config, epsilon))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace pulselab
