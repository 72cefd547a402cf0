#include "pulselab/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pulselab::io {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void expect_keys(const json& j, const std::string& where,
                 std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) fail(where, "unknown key \"" + key + "\"");
  }
}

double get_num(const json& j, const std::string& where, const char* key,
               std::optional<double> def = std::nullopt) {
  if (!j.contains(key)) {
    if (def) return *def;
    fail(where, std::string("missing key \"") + key + "\"");
  }
  const auto& v = j.at(key);
  if (!v.is_number()) fail(where + "." + key, "expected a number");
  return v.get<double>();
}

std::int64_t get_int(const json& j, const std::string& where, const char* key,
                     std::optional<std::int64_t> def = std::nullopt) {
  if (!j.contains(key)) {
    if (def) return *def;
    fail(where, std::string("missing key \"") + key + "\"");
  }
  const auto& v = j.at(key);
  if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

GridConfig parse_grid(const json& j) {
  expect_keys(j, "grid", {"N", "sigma", "k_min", "k_max"});
  GridConfig g;
  g.N = static_cast<int>(get_int(j, "grid", "N"));
  g.sigma = get_num(j, "grid", "sigma");
  g.k_min = get_int(j, "grid", "k_min");
  g.k_max = get_int(j, "grid", "k_max");
  try {
    g.validate();
  } catch (const std::exception& e) {
    fail("grid", e.what());
  }
  return g;
}

SpikeTrain parse_spikes(const json& j) {
  if (!j.is_array()) fail("spikes", "expected an array");
  SpikeTrain t;
  std::size_t i = 0;
  for (const auto& e : j) {
    const std::string where = "spikes[" + std::to_string(i++) + "]";
    expect_keys(e, where, {"k", "c"});
    Spike s;
    s.k = get_int(e, where, "k");
    s.c = get_num(e, where, "c");
    t.entries.push_back(s);
  }
  return t;
}

NoiseSpec parse_noise(const json& j) {
  expect_keys(j, "noise", {"delta", "kind", "seed"});
  NoiseSpec n;
  n.delta = get_num(j, "noise", "delta", 0.0);
  if (n.delta < 0.0) fail("noise.delta", "must be >= 0");
  if (j.contains("kind")) {
    const std::string k = j.at("kind").get<std::string>();
    if (k == "uniform_sign")
      n.kind = NoiseKind::uniform_sign;
    else if (k == "gaussian_shape")
      n.kind = NoiseKind::gaussian_shape;
    else
      fail("noise.kind", "expected \"uniform_sign\" or \"gaussian_shape\"");
  }
  n.seed = static_cast<std::uint64_t>(get_int(j, "noise", "seed", 0));
  return n;
}

SolverSpec parse_solver(const json& j) {
  expect_keys(j, "solver", {"feas_tol", "opt_tol", "max_iter", "nonneg"});
  SolverSpec s;
  s.options.feas_tol = get_num(j, "solver", "feas_tol", 1e-9);
  if (j.contains("opt_tol")) s.options.opt_tol = get_num(j, "solver", "opt_tol");
  s.options.max_iter =
      static_cast<std::size_t>(get_int(j, "solver", "max_iter", 100000));
  if (j.contains("nonneg")) {
    if (!j.at("nonneg").is_boolean()) fail("solver.nonneg", "expected a boolean");
    s.nonneg = j.at("nonneg").get<bool>();
  }
  return s;
}

AnalysisSpec parse_analysis(const json& j) {
  expect_keys(j, "analysis", {"nu", "r", "epsilon"});
  AnalysisSpec a;
  a.nu = get_num(j, "analysis", "nu");
  if (a.nu <= 0.0) fail("analysis.nu", "must be > 0");
  if (j.contains("r")) a.r = static_cast<int>(get_int(j, "analysis", "r"));
  if (j.contains("epsilon")) a.epsilon = get_num(j, "analysis", "epsilon");
  return a;
}

CertificateSpec parse_certificate(const json& j) {
  expect_keys(j, "certificate",
              {"support", "signs", "sigma", "sweep", "M_max", "nu_grid"});
  CertificateSpec c;
  if (j.contains("support")) {
    for (const auto& v : j.at("support")) {
      if (!v.is_number()) fail("certificate.support", "expected numbers");
      c.support.push_back(v.get<double>());
    }
  }
  if (j.contains("signs")) {
    for (const auto& v : j.at("signs")) {
      if (!v.is_number_integer()) fail("certificate.signs", "expected +-1 integers");
      c.signs.push_back(v.get<int>());
    }
  }
  c.sigma = get_num(j, "certificate", "sigma", 0.0);
  if (j.contains("sweep")) {
    if (!j.at("sweep").is_boolean()) fail("certificate.sweep", "expected a boolean");
    c.sweep = j.at("sweep").get<bool>();
  }
  c.M_max = static_cast<int>(get_int(j, "certificate", "M_max", 6));
  if (j.contains("nu_grid")) {
    const auto& g = j.at("nu_grid");
    expect_keys(g, "certificate.nu_grid", {"start", "stop", "step"});
    c.nu_start = get_num(g, "certificate.nu_grid", "start");
    c.nu_stop = get_num(g, "certificate.nu_grid", "stop");
    c.nu_step = get_num(g, "certificate.nu_grid", "step");
    if (!(c.nu_start > 0.0) || !(c.nu_step > 0.0) || c.nu_stop < c.nu_start)
      fail("certificate.nu_grid", "need 0 < start <= stop and step > 0");
  }
  return c;
}

BenchSpec parse_bench(const json& j) {
  expect_keys(j, "bench", {"deltas", "trials", "seed0", "seeds"});
  BenchSpec b;
  if (!j.contains("deltas")) fail("bench", "missing key \"deltas\"");
  for (const auto& v : j.at("deltas")) {
    if (!v.is_number()) fail("bench.deltas", "expected numbers");
    b.deltas.push_back(v.get<double>());
  }
  if (b.deltas.empty()) fail("bench.deltas", "must be non-empty");
  if (j.contains("seeds")) {
    for (const auto& v : j.at("seeds"))
      b.seeds.push_back(static_cast<std::uint64_t>(v.get<std::int64_t>()));
  } else {
    const std::int64_t trials = get_int(j, "bench", "trials", 1);
    const std::int64_t seed0 = get_int(j, "bench", "seed0", 1);
    if (trials < 1) fail("bench.trials", "must be >= 1");
    for (std::int64_t i = 0; i < trials; ++i)
      b.seeds.push_back(static_cast<std::uint64_t>(seed0 + i));
  }
  return b;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("config", e.what());
  }
  expect_keys(j, "config",
              {"kernel", "grid", "spikes", "noise", "solver", "analysis",
               "certificate", "bench"});
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  cfg.raw = text;
  if (j.contains("kernel")) {
    const auto& k = j.at("kernel");
    expect_keys(k, "kernel", {"family", "epsilon", "samples_path"});
    if (k.contains("family")) {
      cfg.kernel.family = k.at("family").get<std::string>();
      if (cfg.kernel.family != "gaussian" && cfg.kernel.family != "cauchy" &&
          cfg.kernel.family != "tabulated")
        fail("kernel.family", "expected gaussian|cauchy|tabulated");
    }
    cfg.kernel.epsilon = get_num(k, "kernel", "epsilon", 0.0);
    if (k.contains("samples_path"))
      cfg.kernel.samples_path = k.at("samples_path").get<std::string>();
  }
  if (j.contains("grid")) cfg.grid = parse_grid(j.at("grid"));
  if (j.contains("spikes")) cfg.spikes = parse_spikes(j.at("spikes"));
  if (j.contains("noise")) cfg.noise = parse_noise(j.at("noise"));
  if (j.contains("solver")) cfg.solver = parse_solver(j.at("solver"));
  if (j.contains("analysis")) cfg.analysis = parse_analysis(j.at("analysis"));
  if (j.contains("certificate"))
    cfg.certificate = parse_certificate(j.at("certificate"));
  if (j.contains("bench")) cfg.bench = parse_bench(j.at("bench"));
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path.string(), "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.parent_path());
}

Kernel make_kernel(const KernelSpec& spec,
                   const std::filesystem::path& base_dir) {
  if (spec.family == "gaussian") return Kernel::gaussian();
  if (spec.family == "cauchy") return Kernel::cauchy();
  if (spec.samples_path.empty())
    fail("kernel", "tabulated kernel requires samples_path");
  std::filesystem::path p(spec.samples_path);
  if (p.is_relative()) p = base_dir / p;
  std::ifstream in(p);
  if (!in) fail(p.string(), "cannot open kernel samples");
  std::vector<double> ts, gs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    double a = 0.0, b = 0.0;
    if (std::sscanf(line.c_str(), "%lf,%lf", &a, &b) != 2) {
      if (lineno == 1) continue;  // optional header
      fail(p.string() + ":" + std::to_string(lineno), "expected \"t,g\"");
    }
    ts.push_back(a);
    gs.push_back(b);
  }
  try {
    return Kernel::tabulated(ts, gs);
  } catch (const std::exception& e) {
    fail(p.string(), e.what());
  }
}

double kernel_epsilon(const KernelSpec& spec, const Kernel& k) {
  return spec.epsilon > 0.0 ? spec.epsilon : k.default_epsilon();
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path.string(), "cannot open file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::pair<std::int64_t, double> parse_kv_row(const std::string& line,
                                             const std::string& where) {
  const std::size_t comma = line.find(',');
  if (comma == std::string::npos) fail(where, "expected two comma-separated fields");
  errno = 0;
  char* end = nullptr;
  const long long k = std::strtoll(line.c_str(), &end, 10);
  if (end != line.c_str() + comma || errno != 0) fail(where, "bad integer index");
  const char* vstart = line.c_str() + comma + 1;
  const double v = std::strtod(vstart, &end);
  if (end == vstart || *end != '\0') fail(where, "bad value field");
  return {static_cast<std::int64_t>(k), v};
}

}  // namespace

void write_measurement_csv(const std::filesystem::path& path,
                           const Measurement& m) {
  std::ofstream out(path);
  if (!out) fail(path.string(), "cannot open file for writing");
  out << "k,y\n";
  for (std::size_t i = 0; i < m.y.size(); ++i)
    out << (m.grid.k_min + static_cast<std::int64_t>(i)) << ','
        << fmt17(m.y[i]) << '\n';
}

ColumnCsv read_kv_csv(const std::filesystem::path& path,
                      const std::string& value_header) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "k," + value_header)
    fail(path.string() + ":1", "expected header \"k," + value_header + "\"");
  ColumnCsv out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto [k, v] =
        parse_kv_row(lines[i], path.string() + ":" + std::to_string(i + 1));
    out.k.push_back(k);
    out.v.push_back(v);
  }
  return out;
}

void write_spikes_csv(const std::filesystem::path& path, const SpikeTrain& s) {
  std::ofstream out(path);
  if (!out) fail(path.string(), "cannot open file for writing");
  out << "k,c\n";
  for (const Spike& e : s.entries) out << e.k << ',' << fmt17(e.c) << '\n';
}

SpikeTrain read_spikes_csv(const std::filesystem::path& path) {
  const ColumnCsv csv = read_kv_csv(path, "c");
  SpikeTrain t;
  for (std::size_t i = 0; i < csv.k.size(); ++i)
    t.entries.push_back({csv.k[i], csv.v[i]});
  return t;
}

void write_solution_csv(const std::filesystem::path& path, std::int64_t k_min,
                        std::span<const double> x_hat) {
  std::ofstream out(path);
  if (!out) fail(path.string(), "cannot open file for writing");
  out << "k,x_hat\n";
  for (std::size_t i = 0; i < x_hat.size(); ++i)
    out << (k_min + static_cast<std::int64_t>(i)) << ',' << fmt17(x_hat[i])
        << '\n';
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace pulselab::io
