#include "pulselab/signal.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "pulselab/simd.hpp"

namespace pulselab {

void GridConfig::validate() const {
  if (N <= 0) throw std::invalid_argument("grid: N must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("grid: sigma must be positive");
  if (k_max - k_min < 10)
    throw std::invalid_argument("grid: window must span at least 10 samples");
  if (static_cast<double>(N) * sigma < 1.0)
    throw std::invalid_argument("grid: N*sigma must be >= 1");
}

void SpikeTrain::validate(const GridConfig& grid) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Spike& s = entries[i];
    if (s.c == 0.0) throw std::invalid_argument("spike train: zero amplitude");
    if (s.k < grid.k_min || s.k > grid.k_max)
      throw std::invalid_argument("spike train: spike at k=" +
                                  std::to_string(s.k) + " outside window");
    if (i > 0 && entries[i - 1].k >= s.k)
      throw std::invalid_argument("spike train: indices must be strictly increasing");
  }
}

double sampled_kernel(const Kernel& kernel, const GridConfig& grid,
                      std::int64_t k) {
  return kernel(grid.arg(static_cast<double>(k)), 0);
}

namespace {

std::vector<double> window_indices(const GridConfig& grid) {
  std::vector<double> ks(grid.window());
  for (std::size_t i = 0; i < ks.size(); ++i)
    ks[i] = static_cast<double>(grid.k_min + static_cast<std::int64_t>(i));
  return ks;
}

}  // namespace

std::vector<double> synthesize(const SpikeTrain& spikes, const Kernel& kernel,
                               const GridConfig& grid) {
  grid.validate();
  spikes.validate(grid);
  const std::vector<double> ks = window_indices(grid);
  std::vector<double> y(ks.size(), 0.0);
  const double inv = 1.0 / (static_cast<double>(grid.N) * grid.sigma);
  for (const Spike& s : spikes.entries)
    kernel.eval_accum(0, ks, static_cast<double>(s.k), inv, s.c, y);
  return y;
}

std::vector<std::int64_t> boundary_spikes(const SpikeTrain& spikes,
                                          const GridConfig& grid) {
  const double margin = 3.0 * grid.sigma * static_cast<double>(grid.N);
  std::vector<std::int64_t> out;
  for (const Spike& s : spikes.entries) {
    const double d_lo = static_cast<double>(s.k - grid.k_min);
    const double d_hi = static_cast<double>(grid.k_max - s.k);
    if (d_lo < margin || d_hi < margin) out.push_back(s.k);
  }
  return out;
}

namespace {

// Uniform in [0,1) from the upper 53 bits; fixed mapping keeps noise shapes
// reproducible across standard libraries.
double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
  double u1 = u01(rng);
  while (u1 == 0.0) u1 = u01(rng);
  const double u2 = u01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace

Measurement add_noise(std::vector<double> y_clean, const GridConfig& grid,
                      double delta, NoiseKind kind, std::uint64_t seed) {
  if (delta < 0.0) throw std::invalid_argument("add_noise: delta must be >= 0");
  if (y_clean.size() != grid.window())
    throw std::invalid_argument("add_noise: sample vector does not match grid");
  Measurement m;
  m.grid = grid;
  m.delta = delta;
  if (delta == 0.0) {
    m.y = std::move(y_clean);
    return m;
  }
  std::mt19937_64 rng(seed);
  std::vector<double> n(y_clean.size());
  if (kind == NoiseKind::uniform_sign) {
    for (double& v : n) v = (rng() & 1u) ? 1.0 : -1.0;
  } else {
    for (double& v : n) v = standard_normal(rng);
  }
  // two normalization passes pin sum|n| to delta at roundoff level
  for (int pass = 0; pass < 2; ++pass) {
    const double s = simd::ops().l1_norm(n.data(), n.size());
    if (!(s > 0.0)) throw std::runtime_error("add_noise: degenerate noise draw");
    const double f = delta / s;
    for (double& v : n) v *= f;
  }
  m.y = std::move(y_clean);
  for (std::size_t i = 0; i < m.y.size(); ++i) m.y[i] += n[i];
  return m;
}

std::vector<double> ConvolutionMatrix::apply(std::span<const double> x) const {
  if (x.size() != w_) throw std::invalid_argument("convolution apply: size mismatch");
  std::vector<double> y(w_);
  simd::ops().matvec(data_.data(), w_, w_, x.data(), y.data());
  return y;
}

ConvolutionMatrix convolution_matrix(const Kernel& kernel,
                                     const GridConfig& grid) {
  grid.validate();
  const std::size_t w = grid.window();
  if (w > 100000) throw std::length_error("convolution_matrix: window too large");
  // first row of the symmetric Toeplitz operator
  std::vector<double> offs(w), row(w, 0.0);
  for (std::size_t i = 0; i < w; ++i) offs[i] = static_cast<double>(i);
  const double inv = 1.0 / (static_cast<double>(grid.N) * grid.sigma);
  kernel.eval_accum(0, offs, 0.0, inv, 1.0, row);
  std::vector<double> a(w * w);
  for (std::size_t i = 0; i < w; ++i)
    for (std::size_t j = 0; j < w; ++j)
      a[i * w + j] = row[i >= j ? i - j : j - i];
  return ConvolutionMatrix(std::move(a), w);
}

SeparationCheck check_separation(const SpikeTrain& spikes, double nu,
                                 const GridConfig& grid) {
  if (!(nu > 0.0)) throw std::invalid_argument("check_separation: nu must be > 0");
  SeparationCheck out;
  const auto& e = spikes.entries;
  if (e.size() < 2) return out;  // satisfied, min_gap = +inf
  std::int64_t gap = e[1].k - e[0].k;
  for (std::size_t i = 2; i < e.size(); ++i)
    gap = std::min(gap, e[i].k - e[i - 1].k);
  out.min_gap = gap;
  const double need = nu * grid.sigma * static_cast<double>(grid.N);
  // 1e-9 absolute slack: the threshold product itself carries roundoff
  out.satisfied = static_cast<double>(gap) + 1e-9 >= need;
  return out;
}

int rayleigh_number(const SpikeTrain& spikes, double d, const GridConfig& grid) {
  if (!(d > 0.0)) throw std::invalid_argument("rayleigh_number: d must be > 0");
  const auto& e = spikes.entries;
  if (e.empty()) return 0;
  std::vector<double> pos(e.size());
  for (std::size_t i = 0; i < e.size(); ++i)
    pos[i] = static_cast<double>(e[i].k) / static_cast<double>(grid.N);
  // points p_i..p_j fit in an open interval of length d iff p_j - p_i < d
  int r = 1;
  std::size_t lo = 0;
  for (std::size_t hi = 0; hi < pos.size(); ++hi) {
    while (pos[hi] - pos[lo] >= d) ++lo;
    r = std::max(r, static_cast<int>(hi - lo + 1));
  }
  return r;
}

SpikeTrain extract_spikes(std::span<const double> x, const GridConfig& grid,
                          double rel_tol) {
  if (x.size() != grid.window())
    throw std::invalid_argument("extract_spikes: vector does not match grid");
  const double peak = simd::ops().max_abs(x.data(), x.size());
  const double thresh = rel_tol * std::max(1.0, peak);
  SpikeTrain out;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::fabs(x[i]) > thresh)
      out.entries.push_back({grid.k_min + static_cast<std::int64_t>(i), x[i]});
  return out;
}

}  // namespace pulselab
