#include "pulselab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "pulselab/simd.hpp"
#include "simd/kernel_math.hpp"

namespace pulselab {

namespace {

constexpr double kDefaultScanTmax = 100.0;
constexpr double kDefaultScanStep = 1e-4;
constexpr std::size_t kChunk = 8192;

// Tabulated model: even-reflected value table on [0, (n-1)h] plus
// finite-difference derivative tables. Derivative tables stop two nodes
// short of the range end, where the 5-point stencil no longer fits.
struct TabModel {
  double h = 0.0;
  // tables[l][j] = g^(l)(j*h); tables[l] has n_valid[l] entries
  std::array<std::vector<double>, 4> tables;

  double coverage(int order) const {
    return (static_cast<double>(tables[order].size()) - 1.0) * h;
  }

  // value at node index j with even reflection, parity of the given order
  double node(int order, long long j) const {
    const auto& tab = tables[order];
    double sgn = 1.0;
    if (j < 0) {
      j = -j;
      if (order % 2 == 1) sgn = -1.0;
    }
    if (j >= static_cast<long long>(tab.size())) return 0.0;
    return sgn * tab[static_cast<std::size_t>(j)];
  }

  double eval(double t, int order) const {
    const double s = std::fabs(t);
    if (s > coverage(order)) return 0.0;
    // 4-point cubic Lagrange on nodes j0-1 .. j0+2
    const long long j0 = static_cast<long long>(std::floor(s / h));
    const double u = s / h - static_cast<double>(j0);
    const double ym1 = node(order, j0 - 1);
    const double y0 = node(order, j0);
    const double y1 = node(order, j0 + 1);
    const double y2 = node(order, j0 + 2);
    const double c0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
    const double c1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
    const double c2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
    const double c3 = (u + 1.0) * u * (u - 1.0) / 6.0;
    double v = c0 * ym1 + c1 * y0 + c2 * y1 + c3 * y2;
    if (t < 0.0 && order % 2 == 1) v = -v;
    return v;
  }
};

TabModel build_tab_model(std::span<const double> ts, std::span<const double> gs) {
  if (ts.size() != gs.size() || ts.size() < 9)
    throw std::invalid_argument("tabulated kernel: need >= 9 (t, g) samples");
  std::vector<std::pair<double, double>> pts(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) pts[i] = {ts[i], gs[i]};
  std::sort(pts.begin(), pts.end());

  const double h = pts[1].first - pts[0].first;
  if (!(h > 0.0)) throw std::invalid_argument("tabulated kernel: duplicate t samples");
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = pts[i].first - pts[i - 1].first;
    if (std::fabs(d - h) > 1e-9 * std::max(1.0, std::fabs(h)))
      throw std::invalid_argument("tabulated kernel: grid must be uniform");
  }

  // fold onto [0, T] with even reflection, averaging when both signs present
  const double t_lo = pts.front().first;
  const double t_hi = pts.back().first;
  if (t_lo > 1e-9 || t_hi < h)
    throw std::invalid_argument("tabulated kernel: samples must cover t = 0");
  const long long n = static_cast<long long>(std::llround(std::max(t_hi, -t_lo) / h)) + 1;
  std::vector<double> val(static_cast<std::size_t>(n), 0.0);
  std::vector<int> cnt(static_cast<std::size_t>(n), 0);
  for (const auto& [t, g] : pts) {
    const long long j = std::llabs(std::llround(t / h));
    if (j >= n) continue;
    val[static_cast<std::size_t>(j)] += g;
    cnt[static_cast<std::size_t>(j)] += 1;
  }
  for (long long j = 0; j < n; ++j) {
    if (cnt[static_cast<std::size_t>(j)] == 0)
      throw std::invalid_argument("tabulated kernel: gap in sample grid");
    val[static_cast<std::size_t>(j)] /= cnt[static_cast<std::size_t>(j)];
  }

  TabModel m;
  m.h = h;
  m.tables[0] = std::move(val);
  const auto& v = m.tables[0];
  auto at = [&](long long j) {
    if (j < 0) j = -j;
    if (j >= n) return 0.0;
    return v[static_cast<std::size_t>(j)];
  };
  const long long nd = n - 2;  // central 5-point stencil fits up to n-3
  if (nd < 2) throw std::invalid_argument("tabulated kernel: range too short");
  for (int l = 1; l <= 3; ++l) m.tables[l].resize(static_cast<std::size_t>(nd));
  for (long long j = 0; j < nd; ++j) {
    const double fm2 = at(j - 2), fm1 = at(j - 1), f0 = at(j), f1 = at(j + 1),
                 f2 = at(j + 2);
    m.tables[1][static_cast<std::size_t>(j)] =
        (fm2 - 8.0 * fm1 + 8.0 * f1 - f2) / (12.0 * h);
    m.tables[2][static_cast<std::size_t>(j)] =
        (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * f1 - f2) / (12.0 * h * h);
    m.tables[3][static_cast<std::size_t>(j)] =
        (-fm2 + 2.0 * fm1 - 2.0 * f1 + f2) / (2.0 * h * h * h);
  }
  return m;
}

}  // namespace

struct Kernel::Impl {
  KernelFamily family;
  std::optional<TabModel> tab;
  mutable std::once_flag const_once;
  mutable std::array<double, 4> cached_C{};
};

Kernel Kernel::gaussian() {
  auto impl = std::make_shared<Impl>();
  impl->family = KernelFamily::gaussian;
  return Kernel(std::move(impl));
}

Kernel Kernel::cauchy() {
  auto impl = std::make_shared<Impl>();
  impl->family = KernelFamily::cauchy;
  return Kernel(std::move(impl));
}

Kernel Kernel::tabulated(std::span<const double> t, std::span<const double> g) {
  auto impl = std::make_shared<Impl>();
  impl->family = KernelFamily::tabulated;
  impl->tab = build_tab_model(t, g);
  return Kernel(std::move(impl));
}

KernelFamily Kernel::family() const { return impl_->family; }

double Kernel::operator()(double t, int order) const {
  if (order < 0 || order > 3)
    throw std::invalid_argument("kernel eval: order must be in 0..3");
  if (!std::isfinite(t)) throw std::invalid_argument("kernel eval: t must be finite");
  switch (impl_->family) {
    case KernelFamily::gaussian: return simd::detail::gaussian_deriv(t, order);
    case KernelFamily::cauchy: return simd::detail::cauchy_deriv(t, order);
    default: return impl_->tab->eval(t, order);
  }
}

void Kernel::eval_accum(int order, std::span<const double> t, double shift,
                        double inv_scale, double coeff,
                        std::span<double> out) const {
  if (order < 0 || order > 3)
    throw std::invalid_argument("kernel eval: order must be in 0..3");
  if (t.size() != out.size())
    throw std::invalid_argument("kernel eval_accum: size mismatch");
  switch (impl_->family) {
    case KernelFamily::gaussian:
      simd::ops().gaussian_accum(order, t.data(), t.size(), shift, inv_scale,
                                 coeff, out.data());
      break;
    case KernelFamily::cauchy:
      simd::ops().cauchy_accum(order, t.data(), t.size(), shift, inv_scale,
                               coeff, out.data());
      break;
    default: {
      const TabModel& m = *impl_->tab;
      for (std::size_t i = 0; i < t.size(); ++i)
        out[i] += coeff * m.eval((t[i] - shift) * inv_scale, order);
      break;
    }
  }
}

double Kernel::coverage() const {
  if (impl_->family != KernelFamily::tabulated)
    return std::numeric_limits<double>::infinity();
  return impl_->tab->coverage(3);  // tightest table
}

const std::array<double, 4>& Kernel::global_constants() const {
  std::call_once(impl_->const_once, [this] {
    impl_->cached_C =
        estimate_global_constants(*this, kDefaultScanTmax, kDefaultScanStep);
  });
  return impl_->cached_C;
}

double Kernel::default_epsilon() const {
  switch (impl_->family) {
    case KernelFamily::gaussian: return 0.7;
    case KernelFamily::cauchy: return 0.5;
    default: return std::min(0.7, 0.5 * coverage());
  }
}

double eval(const Kernel& k, double t, int order) { return k(t, order); }

namespace {

struct ScanResult {
  double fmax = -std::numeric_limits<double>::infinity();
  double t_at_max = 0.0;
  double max_delta = 0.0;  // max |f_{i+1} - f_i| over the grid
  double fmax_head = -std::numeric_limits<double>::infinity();  // t < 0.9 hi
  double fmax_tail = -std::numeric_limits<double>::infinity();  // t >= 0.9 hi
  double t_at_tail_max = 0.0;
};

// scan f(t) = |g^(l)(t)| (1+t^2) over [0, hi] at the given step
ScanResult scan_decay_product(const Kernel& k, int order, double hi,
                              double step) {
  ScanResult r;
  const std::size_t n = static_cast<std::size_t>(std::floor(hi / step)) + 1;
  const double tail_start = 0.9 * hi;
  std::vector<double> ts(kChunk), vs(kChunk);
  double prev_f = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t base = 0; base < n; base += kChunk) {
    const std::size_t m = std::min(kChunk, n - base);
    for (std::size_t i = 0; i < m; ++i)
      ts[i] = static_cast<double>(base + i) * step;
    std::fill(vs.begin(), vs.begin() + m, 0.0);
    k.eval_accum(order, std::span(ts).first(m), 0.0, 1.0, 1.0,
                 std::span(vs).first(m));
    for (std::size_t i = 0; i < m; ++i) {
      const double t = ts[i];
      const double f = std::fabs(vs[i]) * (1.0 + t * t);
      if (f > r.fmax) {
        r.fmax = f;
        r.t_at_max = t;
      }
      if (t >= tail_start) {
        if (f > r.fmax_tail) {
          r.fmax_tail = f;
          r.t_at_tail_max = t;
        }
      } else if (f > r.fmax_head) {
        r.fmax_head = f;
      }
      if (!std::isnan(prev_f)) r.max_delta = std::max(r.max_delta, std::fabs(f - prev_f));
      prev_f = f;
    }
  }
  return r;
}

}  // namespace

std::array<double, 4> estimate_global_constants(const Kernel& k, double t_max,
                                                double step) {
  if (t_max < 50.0) throw std::invalid_argument("estimate_global_constants: t_max must be >= 50");
  if (!(step > 0.0) || step > 1e-3)
    throw std::invalid_argument("estimate_global_constants: step must be in (0, 1e-3]");
  const double hi = std::min(t_max, k.coverage());
  std::array<double, 4> C{};
  for (int l = 0; l < 4; ++l) {
    const ScanResult r = scan_decay_product(k, l, hi, step);
    // non-decay detection: the scanned product must have peaked strictly
    // before the tail tenth of the range (1e-9 slack absorbs roundoff on
    // exactly-flat products such as the Cauchy order-0 case)
    if (r.fmax_tail >= (1.0 + 1e-9) * r.fmax_head) {
      throw NotAdmissible("2", r.t_at_tail_max,
                          "derivative order " + std::to_string(l) +
                              ": |g^(l)|(1+t^2) has not decayed by t=" +
                              std::to_string(hi));
    }
    C[static_cast<std::size_t>(l)] = r.fmax + r.max_delta;
  }
  return C;
}

double estimate_local_constants(const Kernel& k, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("estimate_local_constants: epsilon must be > 0");
  const std::size_t n = 200001;
  const double step = epsilon / static_cast<double>(n - 1);
  std::vector<double> ts(kChunk), vs(kChunk);
  double fmin = std::numeric_limits<double>::infinity();
  double t_at_min = 0.0, max_delta = 0.0;
  double first_violation = std::numeric_limits<double>::quiet_NaN();
  double prev_f = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t base = 0; base < n; base += kChunk) {
    const std::size_t m = std::min(kChunk, n - base);
    for (std::size_t i = 0; i < m; ++i)
      ts[i] = static_cast<double>(base + i) * step;
    std::fill(vs.begin(), vs.begin() + m, 0.0);
    k.eval_accum(2, std::span(ts).first(m), 0.0, 1.0, 1.0,
                 std::span(vs).first(m));
    for (std::size_t i = 0; i < m; ++i) {
      const double f = -vs[i];  // -g''(t)
      if (f <= 0.0 && std::isnan(first_violation)) first_violation = ts[i];
      if (f < fmin) {
        fmin = f;
        t_at_min = ts[i];
      }
      if (!std::isnan(prev_f)) max_delta = std::max(max_delta, std::fabs(f - prev_f));
      prev_f = f;
    }
  }
  if (!std::isnan(first_violation))
    throw NotAdmissible("3b", first_violation,
                        "g'' is not strictly negative on [0, epsilon]");
  const double beta = fmin - max_delta;
  if (beta <= 0.0)
    throw NotAdmissible("3b", t_at_min, "no usable beta on [0, epsilon]");
  return beta;
}

AdmissibilityReport check_admissible(const Kernel& k, double epsilon,
                                     double t_max) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("check_admissible: epsilon must be > 0");
  AdmissibilityReport rep;
  const double hi = std::min(t_max, k.coverage());
  if (hi < t_max)
    rep.warnings.push_back(
        "tabulated kernel: admissibility verified on |t| <= " +
        std::to_string(hi) + " only; the global property is unverifiable "
        "beyond the tabulated range");

  // clause 1: real, even, finite
  for (int i = 0; i <= 100; ++i) {
    const double t = hi * static_cast<double>(i) / 100.0;
    const double gp = k(t, 0), gm = k(-t, 0);
    if (!std::isfinite(gp) || std::fabs(gp - gm) > 1e-12 * std::max(1.0, std::fabs(gp))) {
      rep.violation = {"1", t, "g(t) != g(-t) or non-finite value"};
      return rep;
    }
    const double dp = k(t, 1), dm = k(-t, 1);
    if (std::fabs(dp + dm) > 1e-12 * std::max(1.0, std::fabs(dp))) {
      rep.violation = {"1", t, "g'(t) != -g'(-t)"};
      return rep;
    }
  }

  // clause 2: global quadratic-decay bounds
  std::array<double, 4> C{};
  try {
    C = estimate_global_constants(k, std::max(t_max, 50.0), kDefaultScanStep);
  } catch (const NotAdmissible& e) {
    rep.violation = {e.clause, e.witness, e.what()};
    return rep;
  }

  // clause 3a: positive on [0, eps], below g(eps) outside
  const double g_eps = k(epsilon, 0);
  {
    const std::size_t n = 20001;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = epsilon * static_cast<double>(i) / static_cast<double>(n - 1);
      if (!(k(t, 0) > 0.0)) {
        rep.violation = {"3a", t, "g(t) <= 0 inside [0, epsilon]"};
        return rep;
      }
    }
    for (double t = epsilon + kDefaultScanStep; t <= hi; t += 1e-3) {
      if (!(k(t, 0) < g_eps)) {
        rep.violation = {"3a", t, "g(t) >= g(epsilon) outside the peak"};
        return rep;
      }
    }
  }

  // clause 3b: strict concavity at the peak
  double beta = 0.0;
  try {
    beta = estimate_local_constants(k, epsilon);
  } catch (const NotAdmissible& e) {
    rep.violation = {e.clause, e.witness, e.what()};
    return rep;
  }

  AdmissibilityConstants consts;
  consts.C = C;
  consts.epsilon = epsilon;
  consts.beta = beta;
  consts.g0 = k(0.0, 0);
  consts.g2_0 = k(0.0, 2);
  rep.admissible = true;
  rep.constants = consts;
  return rep;
}

}  // namespace pulselab
