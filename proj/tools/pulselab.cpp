// pulselab command-line driver: synth | solve | certify | analyze | bench
// wired for reproducible, file-based experiments.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pulselab/analysis.hpp"
#include "pulselab/certificate.hpp"
#include "pulselab/io.hpp"
#include "pulselab/kernel.hpp"
#include "pulselab/signal.hpp"
#include "pulselab/simd.hpp"
#include "pulselab/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pulselab;

namespace {

constexpr const char* kVersion = "0.2.0";

struct Globals {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

class StageTimer {
 public:
  void start(const std::string& name) {
    name_ = name;
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() {
    const auto dt = std::chrono::steady_clock::now() - t0_;
    timings_[name_] =
        std::chrono::duration_cast<std::chrono::microseconds>(dt).count() /
        1000.0;
  }
  json to_json() const { return json(timings_); }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
  std::map<std::string, double> timings_;
};

void write_manifest(const fs::path& path, const io::ExperimentConfig& cfg,
                    std::uint64_t seed, const StageTimer& timer,
                    const std::vector<std::string>& outputs) {
  json m;
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(io::fnv1a64(cfg.raw)));
  m["config_hash"] = hash;
  m["seed"] = seed;
  m["version"] = kVersion;
  m["simd_backend"] = std::string(simd::name(simd::active_backend()));
  m["timings_ms"] = timer.to_json();
  m["outputs"] = outputs;
  std::ofstream out(path);
  out << m.dump(2) << '\n';
}

const GridConfig& need_grid(const io::ExperimentConfig& cfg) {
  if (!cfg.grid) throw io::ConfigError("config: missing \"grid\" section");
  return *cfg.grid;
}

const SpikeTrain& need_spikes(const io::ExperimentConfig& cfg) {
  if (!cfg.spikes) throw io::ConfigError("config: missing \"spikes\" section");
  return *cfg.spikes;
}

io::NoiseSpec noise_or_default(const io::ExperimentConfig& cfg) {
  return cfg.noise.value_or(io::NoiseSpec{});
}

std::string status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max_iter";
    default: return "infeasible";
  }
}

AdmissibilityConstants admissible_or_die(const Kernel& k, double epsilon) {
  const AdmissibilityReport rep = check_admissible(k, epsilon);
  for (const std::string& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  if (!rep.admissible) {
    const auto& v = *rep.violation;
    throw io::ConfigError("kernel fails admissibility clause " + v.clause +
                          " at t=" + io::fmt17(v.witness) + ": " + v.detail);
  }
  return *rep.constants;
}

int cmd_synth(const io::ExperimentConfig& cfg, const Globals& g) {
  StageTimer timer;
  timer.start("synth");
  const GridConfig& grid = need_grid(cfg);
  const SpikeTrain& spikes = need_spikes(cfg);
  const Kernel kernel = io::make_kernel(cfg.kernel, cfg.base_dir);
  const io::NoiseSpec noise = noise_or_default(cfg);
  const std::uint64_t seed = g.seed.value_or(noise.seed);

  for (const std::int64_t k : boundary_spikes(spikes, grid))
    std::cerr << "warning: spike at k=" << k
              << " is within 3*sigma*N of the window edge; observable mass "
                 "leaks out of the window\n";

  std::vector<double> y_clean = synthesize(spikes, kernel, grid);
  const Measurement m =
      add_noise(std::move(y_clean), grid, noise.delta, noise.kind, seed);
  timer.stop();

  const fs::path out(g.out_dir);
  fs::create_directories(out);
  timer.start("write");
  io::write_measurement_csv(out / "measurement.csv", m);
  io::write_spikes_csv(out / "spikes_true.csv", spikes);
  timer.stop();
  write_manifest(out / "manifest_synth.json", cfg, seed, timer,
                 {"measurement.csv", "spikes_true.csv"});
  return 0;
}

int cmd_solve(const io::ExperimentConfig& cfg, const Globals& g,
              const std::string& measurement_path) {
  StageTimer timer;
  const GridConfig& grid = need_grid(cfg);
  const Kernel kernel = io::make_kernel(cfg.kernel, cfg.base_dir);
  const io::NoiseSpec noise = noise_or_default(cfg);

  fs::path mpath = measurement_path.empty()
                       ? fs::path(g.out_dir) / "measurement.csv"
                       : fs::path(measurement_path);
  timer.start("read");
  const io::ColumnCsv csv = io::read_kv_csv(mpath, "y");
  if (csv.k.size() != grid.window() || csv.k.empty() ||
      csv.k.front() != grid.k_min)
    throw io::ConfigError(mpath.string() + ": samples do not match the grid window");
  for (std::size_t i = 1; i < csv.k.size(); ++i)
    if (csv.k[i] != csv.k[i - 1] + 1)
      throw io::ConfigError(mpath.string() + ": sample indices must be contiguous");
  timer.stop();

  timer.start("operator");
  auto G = std::make_shared<ConvolutionMatrix>(convolution_matrix(kernel, grid));
  timer.stop();

  ProblemInstance inst;
  inst.G = G;
  inst.y = csv.v;
  inst.delta = noise.delta;
  inst.nonneg = cfg.solver.nonneg;
  inst.grid = grid;

  timer.start("solve");
  const Solution sol = solve(inst, cfg.solver.options);
  timer.stop();

  const fs::path out(g.out_dir);
  fs::create_directories(out);
  timer.start("write");
  io::write_solution_csv(out / "solution.csv", grid.k_min, sol.x_hat);
  io::write_spikes_csv(out / "spikes_est.csv", extract_spikes(sol.x_hat, grid));
  json rep;
  rep["status"] = status_name(sol.status);
  rep["objective_l1"] = sol.objective;
  rep["residual_l1"] = sol.residual_l1;
  rep["delta"] = inst.delta;
  rep["gap"] = sol.gap;
  rep["iterations"] = sol.iterations;
  if (sol.status != SolveStatus::infeasible) {
    const OptimalityCheck chk = verify_optimality(inst, sol, sol.lp_dual);
    rep["verified_gap"] = chk.gap;
    rep["primal_feas"] = chk.primal_feas;
    rep["dual_feas"] = chk.dual_feas;
  }
  std::ofstream(out / "optimality.json") << rep.dump(2) << '\n';
  timer.stop();
  write_manifest(out / "manifest_solve.json", cfg,
                 g.seed.value_or(noise.seed), timer,
                 {"solution.csv", "spikes_est.csv", "optimality.json"});
  if (sol.status == SolveStatus::max_iter) {
    std::cerr << "solver did not converge in " << sol.iterations
              << " iterations; best iterate written\n";
    return 3;
  }
  if (sol.status == SolveStatus::infeasible) {
    std::cerr << "solver flagged the instance as malformed/infeasible\n";
    return 2;
  }
  return 0;
}

int cmd_certify(const io::ExperimentConfig& cfg, const Globals& g) {
  StageTimer timer;
  if (!cfg.certificate)
    throw io::ConfigError("config: missing \"certificate\" section");
  const io::CertificateSpec& spec = *cfg.certificate;
  const Kernel kernel = io::make_kernel(cfg.kernel, cfg.base_dir);
  const double sigma = spec.sigma > 0.0
                           ? spec.sigma
                           : (cfg.grid ? cfg.grid->sigma : 1.0);
  const double epsilon = io::kernel_epsilon(cfg.kernel, kernel);
  const fs::path out(g.out_dir);
  fs::create_directories(out);

  if (spec.sweep) {
    timer.start("sweep");
    NuSweepConfig sweep;
    sweep.M_max = spec.M_max;
    sweep.sigma = sigma;
    sweep.epsilon = epsilon;
    for (double nu = spec.nu_start; nu <= spec.nu_stop + 1e-12;
         nu += spec.nu_step)
      sweep.nu_grid.push_back(nu);
    const std::optional<double> nu_min = minimal_empirical_nu(kernel, sweep);
    timer.stop();
    json rep;
    rep["found"] = nu_min.has_value();
    if (nu_min) rep["nu_min"] = *nu_min;
    rep["protocol"] = {{"M_max", sweep.M_max},
                       {"sigma", sweep.sigma},
                       {"epsilon", sweep.epsilon},
                       {"nu_start", spec.nu_start},
                       {"nu_stop", spec.nu_stop},
                       {"nu_step", spec.nu_step}};
    std::ofstream(out / "nu_sweep.json") << rep.dump(2) << '\n';
    write_manifest(out / "manifest_certify.json", cfg, 0, timer,
                   {"nu_sweep.json"});
    if (!nu_min)
      std::cerr << "no nu in the grid admits a valid certificate\n";
    return 0;
  }

  if (spec.support.empty() || spec.support.size() != spec.signs.size())
    throw io::ConfigError(
        "certificate: need matching \"support\" and \"signs\" arrays");
  timer.start("construct");
  DualCertificate cert;
  try {
    cert = construct(kernel, spec.support, spec.signs, sigma);
  } catch (const ConstructionFailed& e) {
    std::cerr << "certificate construction failed: " << e.what() << '\n';
    return 4;
  }
  timer.stop();
  timer.start("verify");
  const CertificateVerdict verdict =
      verify(cert, epsilon, sigma / 100.0, 10.0 * sigma);
  timer.stop();

  json cj;
  cj["support"] = cert.support;
  cj["signs"] = cert.signs;
  json coeffs = json::array();
  for (const auto& [a, b] : cert.coeffs) coeffs.push_back({a, b});
  cj["coeffs"] = coeffs;
  cj["sigma"] = cert.sigma;
  std::ofstream(out / "certificate.json") << cj.dump(2) << '\n';

  json vj;
  vj["valid"] = verdict.valid;
  vj["interp_residual"] = verdict.interp_residual;
  vj["stationarity_residual"] = verdict.stationarity_residual;
  vj["max_offsupport"] = verdict.max_offsupport;
  vj["max_near_support"] = verdict.max_near_support;
  vj["concavity_ok"] = verdict.concavity_ok;
  vj["tail_bound"] = verdict.tail_bound;
  vj["margin"] = verdict.margin;
  std::ofstream(out / "verdict.json") << vj.dump(2) << '\n';
  write_manifest(out / "manifest_certify.json", cfg, 0, timer,
                 {"certificate.json", "verdict.json"});
  return 0;
}

json bounds_to_json(const analysis::BoundsReport& rep) {
  json b;
  b["gamma"] = rep.gamma;
  b["eps_tilde"] = rep.eps_tilde;
  b["D1"] = rep.d.D1;
  b["D2_applicable"] = rep.d.applicable;
  if (rep.d.applicable)
    b["D2"] = rep.d.D2;
  else
    b["D2_reason"] = rep.d.reason;
  b["localization_applicable"] = rep.localization_applicable;
  if (!rep.localization_applicable)
    b["localization_reason"] = rep.localization_reason;
  b["error_bound_general"] = rep.error_bound_general;
  b["amplitude_threshold"] = rep.amplitude_threshold;
  json radii = json::array();
  for (const auto& lb : rep.localization_radii) {
    json r;
    r["applicable"] = lb.applicable;
    if (lb.applicable)
      r["radius"] = lb.radius;
    else
      r["reason"] = lb.reason;
    radii.push_back(r);
  }
  b["localization_radii"] = radii;
  if (rep.d.applicable) b["spurious_mass_bound"] = rep.spurious_mass_bound;
  if (rep.nonneg) {
    b["r"] = rep.r;
    b["error_bound_nonneg"] = rep.nonneg->bound;
    b["nsigma_hypothesis_ok"] = rep.nonneg->hypothesis_ok;
  }
  b["delta"] = rep.delta;
  b["nu"] = rep.nu;
  b["epsilon"] = rep.epsilon;
  // the localization display mixes epsilon (amplitude condition) and
  // eps_tilde (radius); both are implemented exactly as printed
  b["note"] = "amplitude condition uses epsilon^2; radius uses eps_tilde^2";
  return b;
}

int cmd_analyze(const io::ExperimentConfig& cfg, const Globals& g,
                const std::string& solution_path,
                const std::string& truth_path) {
  StageTimer timer;
  const GridConfig& grid = need_grid(cfg);
  if (!cfg.analysis) throw io::ConfigError("config: missing \"analysis\" section");
  const Kernel kernel = io::make_kernel(cfg.kernel, cfg.base_dir);
  const double epsilon = cfg.analysis->epsilon.value_or(
      io::kernel_epsilon(cfg.kernel, kernel));
  const io::NoiseSpec noise = noise_or_default(cfg);

  SpikeTrain truth;
  if (!truth_path.empty())
    truth = io::read_spikes_csv(truth_path);
  else if (cfg.spikes)
    truth = *cfg.spikes;

  timer.start("constants");
  const AdmissibilityConstants consts = admissible_or_die(kernel, epsilon);
  timer.stop();

  timer.start("bounds");
  std::optional<int> r;
  if (cfg.analysis->r) r = cfg.analysis->r;
  const analysis::BoundsReport rep = analysis::make_bounds_report(
      consts, grid, cfg.analysis->nu, noise.delta, truth, r);
  timer.stop();

  const fs::path out(g.out_dir);
  fs::create_directories(out);
  std::vector<std::string> outputs = {"bounds.json"};
  std::ofstream(out / "bounds.json") << bounds_to_json(rep).dump(2) << '\n';

  if (!solution_path.empty()) {
    timer.start("compare");
    const io::ColumnCsv sol = io::read_kv_csv(solution_path, "x_hat");
    if (sol.v.size() != grid.window())
      throw io::ConfigError(solution_path + ": solution does not match the grid");
    const analysis::RecoveryMetrics met =
        analysis::compare(sol.v, truth, grid, epsilon);
    timer.stop();
    json mj;
    mj["l1_error"] = met.l1_error;
    mj["spurious_mass"] = met.spurious_mass;
    mj["matched"] = json::array();
    for (const auto& m : met.matched)
      mj["matched"].push_back({{"k_true", m.truth.k},
                               {"k_rec", m.recovered.k},
                               {"distance", m.distance},
                               {"c_true", m.truth.c},
                               {"c_rec", m.recovered.c}});
    mj["missed"] = json::array();
    for (const auto& s : met.missed) mj["missed"].push_back(s.k);
    std::ofstream(out / "metrics.json") << mj.dump(2) << '\n';
    outputs.push_back("metrics.json");
  }
  write_manifest(out / "manifest_analyze.json", cfg, 0, timer, outputs);
  return 0;
}

struct BenchRow {
  double delta = 0.0;
  std::uint64_t seed = 0;
  double l1_error = std::nan("");
  double bound_general = std::nan("");
  double bound_nonneg = std::nan("");
  double max_match_dist = std::nan("");
  double localization_radius = std::nan("");
  double spurious_mass = std::nan("");
  double spurious_bound = std::nan("");
  std::string status = "ok";
};

int cmd_bench(const io::ExperimentConfig& cfg, const Globals& g) {
  StageTimer timer;
  const GridConfig& grid = need_grid(cfg);
  const SpikeTrain& spikes = need_spikes(cfg);
  if (!cfg.bench) throw io::ConfigError("config: missing \"bench\" section");
  if (!cfg.analysis) throw io::ConfigError("config: missing \"analysis\" section");
  const Kernel kernel = io::make_kernel(cfg.kernel, cfg.base_dir);
  const double epsilon = cfg.analysis->epsilon.value_or(
      io::kernel_epsilon(cfg.kernel, kernel));
  const io::NoiseSpec noise = noise_or_default(cfg);

  timer.start("setup");
  const AdmissibilityConstants consts = admissible_or_die(kernel, epsilon);
  auto G = std::make_shared<ConvolutionMatrix>(convolution_matrix(kernel, grid));
  const std::vector<double> y_clean = synthesize(spikes, kernel, grid);
  const double gamma = analysis::gamma_const(grid.N, grid.sigma, epsilon);
  const analysis::DConstants dc =
      analysis::d_constants(consts, cfg.analysis->nu, gamma);
  const double eps_tilde = analysis::epsilon_tilde(consts);
  std::optional<int> rayleigh = cfg.analysis->r;
  timer.stop();

  // rows ordered by (delta, seed) regardless of execution order
  std::vector<BenchRow> rows;
  for (const double d : cfg.bench->deltas)
    for (const std::uint64_t s : cfg.bench->seeds) {
      BenchRow r;
      r.delta = d;
      r.seed = s;
      rows.push_back(r);
    }

  auto run_trial = [&](BenchRow& row) {
    try {
      const Measurement m =
          add_noise(y_clean, grid, row.delta, noise.kind, row.seed);
      ProblemInstance inst;
      inst.G = G;
      inst.y = m.y;
      inst.delta = row.delta;
      inst.nonneg = cfg.solver.nonneg;
      inst.grid = grid;
      const Solution sol = solve(inst, cfg.solver.options);
      if (sol.status != SolveStatus::optimal) {
        row.status = status_name(sol.status);
        return;
      }
      const analysis::RecoveryMetrics met =
          analysis::compare(sol.x_hat, spikes, grid, epsilon);
      row.l1_error = met.l1_error;
      row.spurious_mass = met.spurious_mass;
      row.bound_general =
          analysis::error_bound_general(consts, gamma, row.delta);
      if (rayleigh)
        row.bound_nonneg = analysis::error_bound_nonneg(
                               consts, gamma, *rayleigh, row.delta, grid.N,
                               grid.sigma)
                               .bound;
      if (!met.matched.empty()) {
        double mx = 0.0;
        for (const auto& mm : met.matched)
          mx = std::max(mx, static_cast<double>(mm.distance));
        row.max_match_dist = mx;
      }
      if (dc.applicable) {
        row.spurious_bound =
            analysis::spurious_mass_bound(dc, epsilon, row.delta);
        double rad = std::nan("");
        for (const Spike& s : spikes.entries) {
          const analysis::LocalizationBound lb = analysis::localization_radius(
              s.c, row.delta, consts, dc, grid.N, grid.sigma, eps_tilde);
          if (lb.applicable) rad = std::isnan(rad) ? lb.radius : std::max(rad, lb.radius);
        }
        row.localization_radius = rad;
      }
    } catch (const std::exception& e) {
      std::string msg = e.what();
      for (char& c : msg)
        if (c == ',' || c == '\n') c = ';';
      row.status = "error: " + msg;
    }
  };

  timer.start("trials");
  const unsigned nthreads = std::max(1u, g.threads);
  if (nthreads == 1) {
    for (BenchRow& r : rows) run_trial(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= rows.size()) return;
          run_trial(rows[i]);
        }
      });
    for (auto& th : pool) th.join();
  }
  timer.stop();

  const fs::path out(g.out_dir);
  fs::create_directories(out);
  timer.start("write");
  {
    std::ofstream csv(out / "benchmark.csv");
    csv << "delta,l1_error,bound_general,bound_nonneg,max_match_dist,"
           "localization_radius,spurious_mass,spurious_bound,seed,status\n";
    for (const BenchRow& r : rows)
      csv << io::fmt17(r.delta) << ',' << io::fmt17(r.l1_error) << ','
          << io::fmt17(r.bound_general) << ',' << io::fmt17(r.bound_nonneg)
          << ',' << io::fmt17(r.max_match_dist) << ','
          << io::fmt17(r.localization_radius) << ','
          << io::fmt17(r.spurious_mass) << ',' << io::fmt17(r.spurious_bound)
          << ',' << r.seed << ',' << r.status << '\n';
  }
  {
    std::ofstream csv(out / "summary.csv");
    csv << "delta,trials,mean_l1_error,bound_general,mean_error_over_bound\n";
    std::cout << "delta        mean_l1_error    bound_general    ratio\n";
    for (const double d : cfg.bench->deltas) {
      double sum = 0.0, bound = std::nan("");
      int cnt = 0;
      for (const BenchRow& r : rows)
        if (r.delta == d && r.status == "ok") {
          sum += r.l1_error;
          bound = r.bound_general;
          ++cnt;
        }
      const double mean = cnt ? sum / cnt : std::nan("");
      const double ratio = cnt ? mean / bound : std::nan("");
      csv << io::fmt17(d) << ',' << cnt << ',' << io::fmt17(mean) << ','
          << io::fmt17(bound) << ',' << io::fmt17(ratio) << '\n';
      std::printf("%-12g %-16.6g %-16.6g %-10.3g\n", d, mean, bound, ratio);
    }
  }
  timer.stop();
  write_manifest(out / "manifest_bench.json", cfg, g.seed.value_or(0), timer,
                 {"benchmark.csv", "summary.csv"});

  bool any_ok = false;
  for (const BenchRow& r : rows) any_ok = any_ok || r.status == "ok";
  if (!any_ok) {
    std::cerr << "all bench trials failed\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stream-of-pulses decomposition toolkit"};
  app.set_version_flag("--version", std::string("pulselab ") + kVersion);
  app.require_subcommand(1);

  Globals g;
  app.add_option("--config", g.config_path, "experiment config (JSON)")
      ->envname("PULSELAB_CONFIG");
  app.add_option("--out-dir", g.out_dir, "output directory")
      ->envname("PULSELAB_OUT_DIR");
  app.add_option("--seed", g.seed, "override the config noise seed")
      ->envname("PULSELAB_SEED");
  app.add_option("--threads", g.threads, "bench trial parallelism")
      ->envname("PULSELAB_THREADS");

  auto* synth = app.add_subcommand("synth", "synthesize a noisy measurement");
  auto* solve = app.add_subcommand("solve", "run the l1 decomposition");
  std::string measurement_path;
  solve->add_option("--measurement", measurement_path,
                    "measurement CSV (default <out-dir>/measurement.csv)");
  auto* certify =
      app.add_subcommand("certify", "construct/verify a dual certificate");
  auto* analyze = app.add_subcommand("analyze", "evaluate the theoretical bounds");
  std::string solution_path, truth_path;
  analyze->add_option("--solution", solution_path, "solution CSV to score");
  analyze->add_option("--truth", truth_path,
                      "ground-truth spikes CSV (default: config spikes)");
  auto* bench = app.add_subcommand("bench", "delta-sweep benchmark");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (g.config_path.empty()) throw io::ConfigError("--config is required");
    const io::ExperimentConfig cfg = io::parse_config_file(g.config_path);
    if (synth->parsed()) return cmd_synth(cfg, g);
    if (solve->parsed()) return cmd_solve(cfg, g, measurement_path);
    if (certify->parsed()) return cmd_certify(cfg, g);
    if (analyze->parsed()) return cmd_analyze(cfg, g, solution_path, truth_path);
    if (bench->parsed()) return cmd_bench(cfg, g);
  } catch (const io::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConstructionFailed& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
