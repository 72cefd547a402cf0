#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pulselab/simd.hpp"

using namespace pulselab;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo,
                               double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

bool have_avx2() { return simd::available(simd::Backend::avx2); }

// relative-or-absolute agreement between backend results
void check_close(double a, double b, double rel, double abs_tol = 1e-300) {
  CHECK(std::fabs(a - b) <=
        rel * std::max(std::fabs(a), std::fabs(b)) + abs_tol);
}

}  // namespace

TEST_CASE("scalar and avx2 reductions agree") {
  if (!have_avx2()) return;
  const auto& sc = simd::ops_for(simd::Backend::scalar);
  const auto& vx = simd::ops_for(simd::Backend::avx2);
  std::mt19937_64 rng(42);
  for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{3},
                        std::size_t{4}, std::size_t{7}, std::size_t{64},
                        std::size_t{1001}}) {
    const auto x = random_vec(rng, n, -3.0, 3.0);
    const auto y = random_vec(rng, n, -3.0, 3.0);
    check_close(sc.l1_norm(x.data(), n), vx.l1_norm(x.data(), n), 1e-13);
    check_close(sc.dot(x.data(), y.data(), n), vx.dot(x.data(), y.data(), n),
                1e-12, 1e-15);
    CHECK(sc.max_abs(x.data(), n) == vx.max_abs(x.data(), n));
  }
}

TEST_CASE("scalar and avx2 axpy/matvec agree") {
  if (!have_avx2()) return;
  const auto& sc = simd::ops_for(simd::Backend::scalar);
  const auto& vx = simd::ops_for(simd::Backend::avx2);
  std::mt19937_64 rng(7);
  const std::size_t m = 33, n = 47;
  const auto A = random_vec(rng, m * n, -2.0, 2.0);
  const auto x = random_vec(rng, n, -2.0, 2.0);
  const auto xm = random_vec(rng, m, -2.0, 2.0);

  std::vector<double> y1(m), y2(m);
  sc.matvec(A.data(), m, n, x.data(), y1.data());
  vx.matvec(A.data(), m, n, x.data(), y2.data());
  for (std::size_t i = 0; i < m; ++i) check_close(y1[i], y2[i], 1e-13, 1e-15);

  std::vector<double> t1(n), t2(n);
  sc.matvec_t(A.data(), m, n, xm.data(), t1.data());
  vx.matvec_t(A.data(), m, n, xm.data(), t2.data());
  for (std::size_t j = 0; j < n; ++j) check_close(t1[j], t2[j], 1e-13, 1e-15);

  auto a1 = x, a2 = x;
  sc.axpy(1.7, t1.data(), a1.data(), n);
  vx.axpy(1.7, t1.data(), a2.data(), n);
  for (std::size_t j = 0; j < n; ++j) check_close(a1[j], a2[j], 1e-14, 1e-15);
}

TEST_CASE("scalar and avx2 gram agree") {
  if (!have_avx2()) return;
  const auto& sc = simd::ops_for(simd::Backend::scalar);
  const auto& vx = simd::ops_for(simd::Backend::avx2);
  std::mt19937_64 rng(99);
  const std::size_t m = 21, k = 55;
  const auto B = random_vec(rng, m * k, -1.5, 1.5);
  std::vector<double> g1(m * m), g2(m * m);
  sc.gram(B.data(), m, k, g1.data());
  vx.gram(B.data(), m, k, g2.data());
  for (std::size_t i = 0; i < m * m; ++i)
    check_close(g1[i], g2[i], 1e-13, 1e-15);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) CHECK(g2[i * m + j] == g2[j * m + i]);
}

TEST_CASE("pulse kernels agree between backends across orders and scales") {
  if (!have_avx2()) return;
  const auto& sc = simd::ops_for(simd::Backend::scalar);
  const auto& vx = simd::ops_for(simd::Backend::avx2);
  std::mt19937_64 rng(3);
  // cover the peak, moderate tails, and the deep-underflow region
  std::vector<double> ts = random_vec(rng, 2003, -40.0, 40.0);
  ts.push_back(0.0);
  ts.push_back(1e6);
  ts.push_back(-1e6);
  ts.push_back(37.6);
  for (int order = 0; order <= 3; ++order) {
    for (const double shift : {0.0, 2.5}) {
      std::vector<double> o1(ts.size(), 0.0), o2(ts.size(), 0.0);
      sc.gaussian_accum(order, ts.data(), ts.size(), shift, 0.1, 1.3,
                        o1.data());
      vx.gaussian_accum(order, ts.data(), ts.size(), shift, 0.1, 1.3,
                        o2.data());
      for (std::size_t i = 0; i < ts.size(); ++i)
        check_close(o1[i], o2[i], 5e-13, 1e-290);

      std::fill(o1.begin(), o1.end(), 0.0);
      std::fill(o2.begin(), o2.end(), 0.0);
      sc.cauchy_accum(order, ts.data(), ts.size(), shift, 0.1, -0.7,
                      o1.data());
      vx.cauchy_accum(order, ts.data(), ts.size(), shift, 0.1, -0.7,
                      o2.data());
      for (std::size_t i = 0; i < ts.size(); ++i)
        check_close(o1[i], o2[i], 5e-13, 1e-290);
    }
  }
}

TEST_CASE("accum actually accumulates") {
  const auto& ops = simd::ops();
  std::vector<double> ts = {0.0, 0.5, 1.0};
  std::vector<double> out = {10.0, 10.0, 10.0};
  ops.gaussian_accum(0, ts.data(), 3, 0.0, 1.0, 2.0, out.data());
  CHECK(out[0] == doctest::Approx(12.0).epsilon(1e-14));
  CHECK(out[1] ==
        doctest::Approx(10.0 + 2.0 * std::exp(-0.125)).epsilon(1e-14));
}

TEST_CASE("backend selection") {
  const simd::Backend active = simd::active_backend();
  CHECK(simd::available(simd::Backend::scalar));
  CHECK((simd::name(active) == "scalar" || simd::name(active) == "avx2"));
  simd::set_backend(simd::Backend::scalar);
  CHECK(simd::active_backend() == simd::Backend::scalar);
  simd::set_backend(active);
}

TEST_CASE("deterministic results on repeated calls") {
  const auto& ops = simd::ops();
  std::mt19937_64 rng(1);
  const auto x = random_vec(rng, 513, -1.0, 1.0);
  std::vector<double> a(513, 0.0), b(513, 0.0);
  ops.gaussian_accum(2, x.data(), x.size(), 0.3, 0.7, 1.1, a.data());
  ops.gaussian_accum(2, x.data(), x.size(), 0.3, 0.7, 1.1, b.data());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(a[i] == b[i]);
}
