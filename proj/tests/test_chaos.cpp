#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "fracheat/chaos.hpp"
#include "fracheat/errors.hpp"
#include "fracheat/quadrature.hpp"
#include "fracheat/rng.hpp"
#include "test_support.hpp"

using namespace fracheat;

namespace {

// c_m with int_{T_m(u)} prod gap^{-1/2} = c_m u^{m/2}, built by 1-D quadrature
// of c_m = c_{m-1} int_0^1 g^{-1/2} (1-g)^{(m-1)/2} dg.
double dirichlet_constant(std::size_t m) {
  double c = 1.0;
  for (std::size_t j = 1; j <= m; ++j) {
    const double e = 0.5 * static_cast<double>(j - 1);
    auto f = [&](double g, double da, double db) { return std::pow(da, -0.5) * std::pow(db, e); };
    c *= integrate_singular(f, 0.0, 1.0, -0.5, 0.0).value;
  }
  return c;
}

}  // namespace

TEST_CASE("psi small cases") {
  std::vector<double> s = {0.5}, t = {0.5};
  CHECK(psi(s, t, 1) == doctest::Approx(0.3989423).epsilon(1e-7));
  Stream r(3, 0);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> a = {r.uniform()}, b = {r.uniform()};
    CHECK(psi(a, b, 1) == doctest::Approx(heat_kernel(a[0] + b[0], 0.0)).epsilon(1e-13));
    CHECK(psi_eps(a, b, 1, 0.3) ==
          doctest::Approx(heat_kernel(a[0] + b[0] + 0.3, 0.0)).epsilon(1e-13));
    CHECK(psi_eps(a, b, 1, 0.0) == psi(a, b, 1));
  }
  std::vector<double> z = {0.0}, z2 = {0.0};
  CHECK_THROWS_AS(psi(z, z2, 1), SingularityError);
}

TEST_CASE("psi invariances and monotonicity in eps") {
  Stream r(5, 1);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t k = 1 + rep % 5;
    std::vector<double> s(k), t(k);
    for (std::size_t i = 0; i < k; ++i) {
      s[i] = r.uniform();
      t[i] = r.uniform();
    }
    const double p = psi(s, t, 1);
    CHECK(psi(t, s, 1) == doctest::Approx(p).epsilon(1e-10));
    std::vector<double> s2(s.rbegin(), s.rend()), t2(t.rbegin(), t.rend());
    CHECK(psi(s2, t2, 1) == doctest::Approx(p).epsilon(1e-10));
    CHECK(psi_eps(s, t, 1, 1e-3) <= p);
    CHECK(psi(s, t, 2) == doctest::Approx(p * p * std::pow(2 * std::numbers::pi, 0.5 * k)
                                          * std::pow(2 * std::numbers::pi, -0.5 * k))
                              .epsilon(1e-10));
  }
}

TEST_CASE("psi matches the defining Gaussian expectation") {
  // k=2: E p_eps(B1_s1 - B2_t1) p_eps(B1_s2 - B2_t2), B2_t2 | B2_t1 integrated exactly
  std::vector<double> s = {0.3, 0.7}, t = {0.5, 0.2};
  const double eps = 1e-4;
  const std::size_t n = 200000;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    Stream g(77, i);
    const double b1a = std::sqrt(s[0]) * g.normal();
    const double b1b = b1a + std::sqrt(s[1] - s[0]) * g.normal();
    const double b2a = std::sqrt(t[0]) * g.normal();
    // B2 at 0.2 given B2 at 0.5
    const double m = t[1] / t[0] * b2a, var = t[1] * (t[0] - t[1]) / t[0];
    v[i] = heat_kernel(eps, b1a - b2a) * heat_kernel(eps + var, b1b - m);
  }
  const double mean = testsupport::mean(v);
  const double se = std::sqrt(testsupport::var(v) / n);
  CHECK(std::abs(mean - psi(s, t, 1)) < 3.0 * se);
}

TEST_CASE("alpha_1 constant weight") {
  auto w = WeightFn::constant(1.0, 1.0);
  QmcConfig q;
  q.n_points = 1 << 12;
  auto a = alpha_k(w, 1.0, 1, 1, q);
  const double exact = 4.0 / 3.0 * (2.0 * std::sqrt(2.0) - 2.0) / std::sqrt(2.0 * std::numbers::pi);
  CHECK(exact == doctest::Approx(0.44066).epsilon(1e-5));
  CHECK(std::abs(a.value / exact - 1.0) < 0.005);
  // cross-check the antiderivative by quadrature
  auto outer = [](double s) {
    return integrate([&](double t) { return heat_kernel(s + t, 0.0); }, 0.0, 1.0).value;
  };
  CHECK(integrate_singular(outer, 0.0, 1.0, 0.0, 0.0).value == doctest::Approx(exact).epsilon(1e-8));
  // scaling with T
  const double T = 1e-3;
  auto small = alpha_k(WeightFn::constant(1.0, T), T, 1, 1, q);
  CHECK(small.value == doctest::Approx(exact * std::pow(T, 1.5)).epsilon(0.01));
  CHECK(small.value < 0.1 * a.value);
}

TEST_CASE("alpha_1 phi weight vs quadrature") {
  for (double h : {0.6, 0.75}) {
    HurstParam H(h);
    auto w = WeightFn::phi(H, 1.0);
    QmcConfig q;
    q.n_points = 1 << 13;
    auto a = alpha_k(w, 1.0, 1, 1, q);
    const double c = h * (2 * h - 1);
    auto outer = [&](double s) {
      auto fl = [&](double t, double, double db) {
        return c * std::pow(db, 2 * h - 2) * heat_kernel(s + t, 0.0);
      };
      auto fr = [&](double t, double da, double) {
        return c * std::pow(da, 2 * h - 2) * heat_kernel(s + t, 0.0);
      };
      return integrate_singular(fl, 0.0, s, 0.0, 2 * h - 2).value +
             integrate_singular(fr, s, 1.0, 2 * h - 2, 0.0).value;
    };
    const double ref = integrate_singular(outer, 0.0, 1.0, -0.5, 0.0).value;
    CHECK(std::abs(a.value / ref - 1.0) < 0.005);
  }
}

TEST_CASE("alpha_k growth bound") {
  auto w = WeightFn::constant(1.0, 1.0);
  for (std::size_t k = 1; k <= 6; ++k) {
    QmcConfig q;
    q.n_points = 1 << 12;
    q.stream = k;
    auto a = alpha_k(w, 1.0, 1, k, q);
    CHECK(a.value + 3.0 * a.std_error <= alpha_growth_bound(k, 1.0, 1.0));
  }
}

TEST_CASE("alpha regime") {
  auto w = WeightFn::constant(1.0, 1.0);
  CHECK_THROWS_AS(alpha_k(w, 1.0, 2, 1, {}), RegimeError);
  auto p = WeightFn::phi(HurstParam(0.4 + 0.2), 1.0);
  CHECK_THROWS_AS(alpha_k(p, 1.0, 3, 1, {}), RegimeError);
  CHECK_NOTHROW(alpha_k(p, 1.0, 2, 1, {1u << 8, 4, 1, 0, 1}));
}

TEST_CASE("H=1/2 chaos norms: Dirichlet oracle and simplex QMC") {
  const double t = 0.7;
  for (std::size_t n = 1; n <= 6; ++n) {
    const double nf = std::tgamma(n + 1.0);
    const double oracle = nf * std::pow(4 * std::numbers::pi, -0.5 * n) * dirichlet_constant(n) *
                          std::pow(t, 0.5 * n) * nf / nf;
    ChaosConfig cc;
    auto exact = fn_norm_sq(n, HurstParam(0.5), 1, t, U0::constant(1.0), {}, cc);
    CHECK(exact.exact);
    CHECK(exact.value == doctest::Approx(oracle).epsilon(1e-9));
    cc.method = NormMethod::QuasiMC;
    cc.qmc.n_points = 1 << 12;
    auto q = fn_norm_sq(n, HurstParam(0.5), 1, t, U0::constant(1.0), {}, cc);
    CHECK(std::abs(q.value / oracle - 1.0) < 0.005);
    // the printed Gamma((n+1)/2) expression is not the value
    const double printed = std::pow(2.0, -double(n)) * std::pow(t, 0.5 * n) /
                           (nf * std::tgamma(0.5 * (n + 1.0)));
    CHECK(std::abs(printed / exact.value - 1.0) > 0.01);
  }
  CHECK(fn_norm_sq(0, HurstParam(0.5), 1, 0.3, U0::constant(1.0), {}, {}).value == 1.0);
  CHECK(fn_norm_sq(0, HurstParam(0.5), 1, 0.3, U0::constant(2.0), {}, {}).value == 4.0);
}

TEST_CASE("H=0.75 first chaos norm equals alpha_1") {
  ChaosConfig cc;
  cc.qmc.n_points = 1 << 12;
  auto f1 = fn_norm_sq(1, HurstParam(0.75), 1, 0.5, U0::constant(1.0), {}, cc);
  QmcConfig q;
  q.n_points = 1 << 12;
  q.seed = 99;
  auto a = alpha_k(WeightFn::phi(HurstParam(0.75), 0.5), 0.5, 1, 1, q);
  CHECK(std::abs(f1.value - a.value) < 3.0 * std::hypot(f1.std_error, a.std_error) + 1e-12);
}

TEST_CASE("second moment series at H=1/2") {
  const double t = 0.25;
  ChaosConfig cc;
  auto s = second_moment_series(HurstParam(0.5), 1, t, U0::constant(1.0), 12, cc);
  const double x = std::sqrt(t) / 2.0;
  const double exact = std::exp(x * x) * (1.0 + std::erf(x));
  CHECK(s.tail_estimate < 1e-8);
  CHECK(s.sum == doctest::Approx(exact).epsilon(1e-9));
  CHECK(exact == doctest::Approx(1.35866).epsilon(1e-5));
  double partial = 0.0, prev_gap = INFINITY;
  for (double v : s.terms) {
    partial += v;
    const double gap = std::abs(exact - partial);
    CHECK(gap <= prev_gap);
    prev_gap = gap;
  }
  auto tiny = second_moment_series(HurstParam(0.5), 1, 1e-8, U0::constant(2.0), 12, cc);
  CHECK(tiny.sum == doctest::Approx(4.0).epsilon(1e-3));
  CHECK_THROWS_AS(second_moment_series(HurstParam(0.4), 1, t, U0::constant(1.0), 12, cc),
                  RegimeError);
}

TEST_CASE("d=2 threshold") {
  HurstParam H(0.75);
  ChaosConfig cc;
  cc.qmc.n_points = 1 << 8;
  cc.qmc.n_replicates = 4;
  cc.beta_H = 1.0;
  const double T0 = critical_time_T0(H, 2, 1.0);
  CHECK(T0 == doctest::Approx(std::pow(std::pow(std::tgamma(1.0 / 3.0), 1.5), -2.0)));
  CHECK_THROWS_AS(second_moment_series(H, 2, T0, U0::constant(1.0), 4, cc), RegimeError);
  CHECK_THROWS_AS(second_moment_series(H, 2, 1.5 * T0, U0::constant(1.0), 4, cc), RegimeError);
  CHECK_NOTHROW(second_moment_series(H, 2, 0.5 * T0, U0::constant(1.0), 4, cc));
  CHECK(critical_time_T0(H, 2, 2.0) < T0);
  cc.beta_H.reset();
  CHECK_THROWS_AS(second_moment_series(H, 2, 0.5 * T0, U0::constant(1.0), 4, cc), ConfigError);
}
