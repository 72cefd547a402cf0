#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pulselab/kernel.hpp"

namespace pulselab {

/// Sampling grid: spacing 1/N in real time, pulse scale sigma, observation
/// window [k_min, k_max] in grid indices.
struct GridConfig {
  int N = 1;
  double sigma = 1.0;
  std::int64_t k_min = 0;
  std::int64_t k_max = 0;

  std::size_t window() const { return static_cast<std::size_t>(k_max - k_min + 1); }
  /// kernel argument of grid offset k: k / (N sigma)
  double arg(double k) const { return k / (static_cast<double>(N) * sigma); }
  void validate() const;
};

struct Spike {
  std::int64_t k = 0;
  double c = 0.0;
};

/// Sparse signal: strictly increasing grid indices with nonzero amplitudes.
struct SpikeTrain {
  std::vector<Spike> entries;
  void validate(const GridConfig& grid) const;
};

struct Measurement {
  std::vector<double> y;
  double delta = 0.0;
  GridConfig grid;
};

/// g_sigma[k] = g(k / (N sigma))
double sampled_kernel(const Kernel& kernel, const GridConfig& grid,
                      std::int64_t k);

/// Clean samples y[k] = sum_m c_m g_sigma[k - k_m] at every window index.
std::vector<double> synthesize(const SpikeTrain& spikes, const Kernel& kernel,
                               const GridConfig& grid);

/// Spikes whose observable mass leaks out of the window: within 3 sigma N
/// indices of either window edge.
std::vector<std::int64_t> boundary_spikes(const SpikeTrain& spikes,
                                          const GridConfig& grid);

enum class NoiseKind { uniform_sign, gaussian_shape };

/// Adds a seeded noise vector rescaled so that sum_k |n[k]| equals delta.
Measurement add_noise(std::vector<double> y_clean, const GridConfig& grid,
                      double delta, NoiseKind kind, std::uint64_t seed);

/// Dense W x W operator with G[k, j] = g_sigma[k - j], both indices running
/// over the window. Symmetric Toeplitz, stored row-major.
class ConvolutionMatrix {
 public:
  ConvolutionMatrix(std::vector<double> data, std::size_t w)
      : data_(std::move(data)), w_(w) {}
  std::size_t size() const { return w_; }
  double at(std::size_t i, std::size_t j) const { return data_[i * w_ + j]; }
  const double* data() const { return data_.data(); }
  /// y = G x
  std::vector<double> apply(std::span<const double> x) const;

 private:
  std::vector<double> data_;
  std::size_t w_;
};

ConvolutionMatrix convolution_matrix(const Kernel& kernel,
                                     const GridConfig& grid);

struct SeparationCheck {
  bool satisfied = true;
  std::optional<std::int64_t> min_gap;  // empty = +inf (0 or 1 spikes)
};

/// Definition-style separation: min pairwise |k_i - k_j| >= nu sigma N.
SeparationCheck check_separation(const SpikeTrain& spikes, double nu,
                                 const GridConfig& grid);

/// Smallest r such that every open interval of length d (real units)
/// contains at most r of the points {k_m / N}.
int rayleigh_number(const SpikeTrain& spikes, double d, const GridConfig& grid);

/// Reads a spike train off a grid vector; entries with
/// |x[k]| <= rel_tol * max(1, ||x||_inf) count as zero.
SpikeTrain extract_spikes(std::span<const double> x, const GridConfig& grid,
                          double rel_tol = 1e-6);

}  // namespace pulselab
