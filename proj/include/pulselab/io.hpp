#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pulselab/signal.hpp"
#include "pulselab/solver.hpp"

namespace pulselab::io {

/// Bad or missing configuration / input files; the CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Full-precision decimal formatting (17 significant digits); round-trips
/// doubles exactly and keeps CSV output byte-reproducible.
std::string fmt17(double v);

struct KernelSpec {
  std::string family = "gaussian";
  double epsilon = 0.0;  // 0 = family default
  std::string samples_path;
};

struct NoiseSpec {
  double delta = 0.0;
  NoiseKind kind = NoiseKind::uniform_sign;
  std::uint64_t seed = 0;
};

struct SolverSpec {
  SolveOptions options;
  bool nonneg = false;
};

struct AnalysisSpec {
  double nu = 0.0;
  std::optional<int> r;
  std::optional<double> epsilon;
};

struct CertificateSpec {
  std::vector<double> support;
  std::vector<int> signs;
  double sigma = 0.0;  // 0 = grid sigma, else 1
  bool sweep = false;
  int M_max = 6;
  double nu_start = 0.2, nu_stop = 3.0, nu_step = 0.05;
};

struct BenchSpec {
  std::vector<double> deltas;
  std::vector<std::uint64_t> seeds;
};

struct ExperimentConfig {
  KernelSpec kernel;
  std::optional<GridConfig> grid;
  std::optional<SpikeTrain> spikes;
  std::optional<NoiseSpec> noise;
  SolverSpec solver;
  std::optional<AnalysisSpec> analysis;
  std::optional<CertificateSpec> certificate;
  std::optional<BenchSpec> bench;
  std::filesystem::path base_dir;  // directory of the config file
  std::string raw;                 // original bytes, hashed into manifests
};

/// Strict parse: unknown keys anywhere in the document are rejected.
ExperimentConfig parse_config_file(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::filesystem::path& base_dir);

Kernel make_kernel(const KernelSpec& spec,
                   const std::filesystem::path& base_dir);
double kernel_epsilon(const KernelSpec& spec, const Kernel& k);

// CSV formats: measurement "k,y", spike train "k,c", solution "k,x_hat"
void write_measurement_csv(const std::filesystem::path& path,
                           const Measurement& m);
struct ColumnCsv {
  std::vector<std::int64_t> k;
  std::vector<double> v;
};
ColumnCsv read_kv_csv(const std::filesystem::path& path,
                      const std::string& value_header);
void write_spikes_csv(const std::filesystem::path& path, const SpikeTrain& s);
SpikeTrain read_spikes_csv(const std::filesystem::path& path);
void write_solution_csv(const std::filesystem::path& path, std::int64_t k_min,
                        std::span<const double> x_hat);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace pulselab::io
