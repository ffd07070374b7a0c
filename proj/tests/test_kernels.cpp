#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "doctest.h"
#include "fracheat/errors.hpp"
#include "fracheat/kernels.hpp"
#include "fracheat/quadrature.hpp"

using namespace fracheat;

namespace {

double exp_series(double x) {
  double term = 1.0, s = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= x / k;
    s += term;
  }
  return s;
}

// int_a^b f with extra breakpoints
double integrate_pieces(const Integrand& f, std::vector<double> cuts, double a, double b) {
  cuts.push_back(a);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = std::clamp(cuts[i], a, b), hi = std::clamp(cuts[i + 1], a, b);
    if (hi > lo) s += integrate(f, lo, hi).value;
  }
  return s;
}

}  // namespace

TEST_CASE("heat kernel") {
  CHECK(heat_kernel(1.0, 0.0) == doctest::Approx(0.3989423).epsilon(1e-7));
  std::vector<double> z2 = {0.0, 0.0};
  CHECK(heat_kernel(0.5, z2) == doctest::Approx(0.3183099).epsilon(1e-7));
  const double oracle = exp_series(-0.5) / std::sqrt(2.0 * std::numbers::pi);
  CHECK(heat_kernel(1.0, 1.0) == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(heat_kernel(1.0, 1.0) == doctest::Approx(0.2419707).epsilon(1e-7));
  CHECK_THROWS_AS(heat_kernel(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(heat_kernel(-1.0, 1.0), DomainError);
}

TEST_CASE("mollifier") {
  std::vector<double> x0 = {0.0};
  CHECK(mollifier(x0, {1.0, 1}) == doctest::Approx(0.3989423).epsilon(1e-7));
  std::vector<double> x1 = {0.7};
  const double big = 1e8;
  CHECK(mollifier(x1, {big, 1}) * std::sqrt(2.0 * std::numbers::pi * big) ==
        doctest::Approx(1.0).epsilon(1e-8));
  auto f = [](double x) { return heat_kernel(0.01, x); };
  const double tot = integrate(f, -2.0, 2.0).value;
  CHECK(std::abs(tot - 1.0) < 1e-8);
  CHECK_THROWS_AS(mollifier(x0, {1.0, 2}), DataError);
}

TEST_CASE("heat semigroup") {
  for (double s : {0.1, 0.4}) {
    for (double t : {0.2, 1.3}) {
      for (double x : {0.0, 0.5, -1.2}) {
        auto f = [&](double y) { return heat_kernel(s, x - y) * heat_kernel(t, y); };
        const double v = integrate(f, -15.0, 15.0).value;
        CHECK(std::abs(v - heat_kernel(s + t, x)) < 1e-6);
      }
    }
  }
}

TEST_CASE("hurst parameter") {
  CHECK_THROWS_AS(HurstParam(0.0), ConfigError);
  CHECK_THROWS_AS(HurstParam(1.0), ConfigError);
  CHECK(HurstParam(0.3).regime() == Regime::SubHalf);
  CHECK(HurstParam(0.5).regime() == Regime::Half);
  CHECK(HurstParam(0.7).regime() == Regime::SuperHalf);
  CHECK(HurstParam(0.8).above_three_quarters());
  CHECK_FALSE(HurstParam(0.75).above_three_quarters());
  CHECK(HurstParam(0.4).above_three_eighths());
  CHECK_FALSE(HurstParam(0.375).above_three_eighths());
  CHECK(HurstParam(0.6).d_below_4h(2));
  CHECK_FALSE(HurstParam(0.5).d_below_4h(2));
}

TEST_CASE("phi weight") {
  HurstParam H(0.75);
  CHECK(phi_weight(0.25, 0.5, H) == doctest::Approx(0.75).epsilon(1e-14));
  for (double h : {0.55, 0.7, 0.9})
    CHECK(phi_weight(0.0, 1.0, HurstParam(h)) == doctest::Approx(h * (2 * h - 1)));
  CHECK_THROWS_AS(phi_weight(0.3, 0.3, H), SingularityError);
  CHECK_THROWS_AS(phi_weight(0.3, 0.4, HurstParam(0.5)), RegimeError);
  for (double h : {0.6, 0.75, 0.9}) {
    HurstParam Hh(h);
    // 2-D quadrature with the diagonal singularity split
    auto outer = [&](double s) {
      const double c = h * (2 * h - 1);
      auto gl = [&](double, double, double db) { return c * std::pow(db, 2 * h - 2); };
      auto gr = [&](double, double da, double) { return c * std::pow(da, 2 * h - 2); };
      double v = 0.0;
      if (s > 0) v += integrate_singular(gl, 0.0, s, 0.0, 2 * h - 2).value;
      if (s < 1) v += integrate_singular(gr, s, 1.0, 2 * h - 2, 0.0).value;
      return v;
    };
    QuadOptions o;
    o.rel_tol = 1e-9;
    const double q = integrate(outer, 0.0, 1.0, o).value;
    CHECK(q == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(phi_rect_mass(0.0, 1.0, 0.0, 1.0, Hh) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(phi_rect_mass(0.1, 0.3, 0.6, 0.95, Hh) ==
          doctest::Approx(integrate(
                              [&](double s) {
                                return integrate([&](double t) { return phi_weight(s, t, Hh); },
                                                 0.6, 0.95)
                                    .value;
                              },
                              0.1, 0.3)
                              .value)
              .epsilon(1e-9));
    // norm: sup_s int_0^1 phi(s,t) dt at s = 1/2
    CHECK(outer(0.5) == doctest::Approx(phi_norm_1T(Hh, 1.0)).epsilon(1e-8));
    CHECK(outer(0.3) < phi_norm_1T(Hh, 1.0));
  }
}

TEST_CASE("K_H basics") {
  CHECK(k_h_kernel(1.0, 0.3, HurstParam(0.5)) == 1.0);
  CHECK(k_h_kernel(1.0, 1.0, HurstParam(0.5)) == 1.0);
  for (double h : {0.3, 0.5, 0.7}) {
    CHECK(k_h_kernel(0.4, 0.6, HurstParam(h)) == 0.0);
    CHECK_THROWS_AS(k_h_kernel(0.4, 0.0, HurstParam(h)), DomainError);
  }
  CHECK(k_h_kernel(1.0, 1.0, HurstParam(0.7)) == 0.0);
  CHECK(std::isinf(k_h_kernel(1.0, 1.0, HurstParam(0.3))));
}

TEST_CASE("K_H normalisation and literature constant") {
  for (double h : {0.4, 0.6, 0.75, 0.9}) {
    HurstParam H(h);
    double lit;
    if (h > 0.5)
      lit = std::sqrt(h * (2 * h - 1) / boost::math::beta(2 - 2 * h, h - 0.5));
    else
      lit = std::sqrt(2 * h / ((1 - 2 * h) * boost::math::beta(1 - 2 * h, h + 0.5)));
    CHECK(k_h_constant(H) == doctest::Approx(lit).epsilon(1e-8));
  }
}

TEST_CASE("K_H reproduces the fBm covariance") {
  for (double h : {0.3, 0.4, 0.6, 0.75}) {
    HurstParam H(h);
    const double a0 = -std::abs(2 * h - 1);
    for (auto [t, s] : {std::pair{1.0, 1.0}, std::pair{0.5, 0.5}, std::pair{1.0, 0.6},
                        std::pair{0.8, 0.3}}) {
      const double m = std::min(s, t);
      auto f = [&](double u, double, double db) {
        const double gt = (t == m) ? db : t - u;
        const double gs = (s == m) ? db : s - u;
        return k_h_kernel_gap(u, gt, H) * k_h_kernel_gap(u, gs, H);
      };
      QuadOptions o;
      o.rel_tol = 1e-9;
      double a1 = (s == t) ? std::min(0.0, 2 * h - 1) : std::min(0.0, h - 0.5);
      const double v = integrate_singular(f, 0.0, std::min(s, t), a0, a1, o).value;
      const double r = 0.5 * (std::pow(t, 2 * h) + std::pow(s, 2 * h) - std::pow(t - s, 2 * h));
      CHECK(v == doctest::Approx(r).epsilon(1e-6));
    }
  }
}

TEST_CASE("K_H scaling") {
  for (double h : {0.35, 0.8}) {
    HurstParam H(h);
    const double c = 2.5;
    CHECK(k_h_kernel(c * 0.8, c * 0.3, H) ==
          doctest::Approx(std::pow(c, h - 0.5) * k_h_kernel(0.8, 0.3, H)).epsilon(1e-9));
  }
}

TEST_CASE("K* isometry on indicators") {
  for (double h : {0.4, 0.5, 0.6, 0.75}) {
    HurstParam H(h);
    for (double t : {0.5, 1.0}) {
      auto f = [&](double s, double, double db) {
        const double k = k_h_kernel_gap(s, db, H);
        return k * k;
      };
      const double v = integrate_singular(f, 0.0, t, -std::abs(2 * h - 1),
                                          std::min(0.0, 2 * h - 1))
                           .value;
      CHECK(std::abs(v - std::pow(t, 2 * h)) < 1e-4);
    }
  }
}

TEST_CASE("k_star_apply") {
  std::vector<double> f = {0.3, -1.0, 2.0, 0.5, 0.25};
  auto id = k_star_apply(f, HurstParam(0.5), 1.0);
  CHECK(id == f);

  const std::size_t n = 40;
  const double T = 1.0;
  TimeGrid g(T, n);
  for (double h : {0.4, 0.45}) {
    HurstParam H(h);
    std::vector<double> c(n + 1, 2.0);
    auto out = k_star_apply(c, H, T);
    CHECK(std::isnan(out[0]));
    CHECK(std::isnan(out[n]));
    for (std::size_t i = 1; i < n; ++i)
      CHECK(out[i] == doctest::Approx(2.0 * k_h_kernel(T, g.node(i), H)).epsilon(1e-10));
  }
  // indicator of [0,t0]: K*(1_[0,t0])(s) = K(t0,s)
  for (double h : {0.4, 0.7}) {
    HurstParam H(h);
    const std::size_t n2 = 200;
    TimeGrid g2(T, n2);
    const std::size_t m = 120;
    std::vector<double> ind(n2 + 1);
    for (std::size_t j = 0; j <= n2; ++j) ind[j] = j <= m ? 1.0 : 0.0;
    auto out = k_star_apply(ind, H, T);
    for (std::size_t i : {20u, 60u, 100u}) {
      const double exact = k_h_kernel(g2.node(m), g2.node(i), H);
      CHECK(out[i] == doctest::Approx(exact).epsilon(0.02));
    }
    for (std::size_t i = m + 2; i < n2; ++i) CHECK(std::abs(out[i]) < 0.05);
  }
  std::vector<double> bad = {0.0, NAN, 1.0};
  CHECK_THROWS_AS(k_star_apply(bad, HurstParam(0.4), 1.0), DataError);
}

TEST_CASE("k_star tensor weights integrate K(T,r)^2 exactly for constants") {
  for (double h : {0.4, 0.45, 0.5}) {
    HurstParam H(h);
    KStarOperator op(TimeGrid(1.0, 64), H);
    auto W = op.tensor_weights();
    double s = 0.0;
    for (double v : W) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("eta_delta") {
  HurstParam half(0.5);
  CHECK(eta_delta(0.5, 0.5, 1.0, 0.1, half) == doctest::Approx(10.0).epsilon(1e-12));
  // oracle: 1-D quadrature of int phi_d(t-s1-r) phi_d(t-s2-r) dr
  auto box = [](double x, double d) { return (x >= 0 && x <= d) ? 1.0 / d : 0.0; };
  for (auto [s1, s2] : {std::pair{0.5, 0.5}, std::pair{0.5, 0.53}, std::pair{0.95, 0.97}}) {
    auto f = [&](double r) { return box(1.0 - s1 - r, 0.1) * box(1.0 - s2 - r, 0.1); };
    const double q = integrate_pieces(f, {1 - s1 - 0.1, 1 - s1, 1 - s2 - 0.1, 1 - s2}, 0.0, 1.0);
    CHECK(eta_delta(s1, s2, 1.0, 0.1, half) == doctest::Approx(q).epsilon(1e-10));
  }
  CHECK(eta_delta(0.2, 0.35, 1.0, 0.1, half) == 0.0);
  CHECK(eta_delta(0.2, 0.3, 1.0, 0.1, half) == 0.0);

  HurstParam H(0.75);
  const double t = 1.0, d = 0.05, s1 = 0.3, s2 = 0.5;
  auto inner = [&](double r1) {
    return integrate([&](double r2) { return phi_weight(r1, r2, H); }, t - s2 - d, t - s2).value;
  };
  QuadOptions o;
  o.rel_tol = 1e-12;
  const double q = integrate(inner, t - s1 - d, t - s1, o).value / (d * d);
  CHECK(eta_delta(s1, s2, t, d, H) == doctest::Approx(q).epsilon(1e-6));
  CHECK(eta_delta(s1, s2, t, d, H) == eta_delta(s2, s1, t, d, H));
  CHECK_THROWS_AS(eta_delta(0.2, 0.3, 1.0, 0.1, HurstParam(0.4)), RegimeError);
}

TEST_CASE("eta_delta bound holds on the 50x50x5 grid") {
  for (double h : {0.6, 0.75, 0.9}) {
    HurstParam H(h);
    const double gam = eta_delta_gamma(H);
    CHECK(gam == doctest::Approx(h * std::pow(2.0, 2 - 2 * h)));
    int violations = 0;
    for (double d : {0.2, 0.1, 0.05, 0.02, 0.01})
      for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 50; ++j) {
          const double a = i / 49.0, b = j / 49.0;
          if (a == b) continue;
          if (eta_delta(a, b, 1.0, d, H) > gam * std::pow(std::abs(a - b), 2 * h - 2)) ++violations;
        }
    CHECK(violations == 0);
  }
}

TEST_CASE("eta_delta converges weakly") {
  auto g = [](double s, double t) { return std::cos(s) * (1.0 + t * t); };
  for (double h : {0.5, 0.75}) {
    HurstParam H(h);
    double limit;
    if (H.is_half()) {
      limit = integrate([&](double s) { return g(s, s); }, 0.0, 1.0).value;
    } else {
      const double c = h * (2 * h - 1);
      auto outer = [&](double s) {
        auto fl = [&](double t, double, double db) { return c * std::pow(db, 2 * h - 2) * g(s, t); };
        auto fr = [&](double t, double da, double) { return c * std::pow(da, 2 * h - 2) * g(s, t); };
        return integrate_singular(fl, 0.0, s, 0.0, 2 * h - 2).value +
               integrate_singular(fr, s, 1.0, 2 * h - 2, 0.0).value;
      };
      limit = integrate(outer, 0.0, 1.0).value;
    }
    double prev = INFINITY;
    for (double d : {0.1, 0.05, 0.025}) {
      auto outer = [&](double s1) {
        auto f = [&](double s2) { return eta_delta(s1, s2, 1.0, d, H) * g(s1, s2); };
        return integrate_pieces(f, {s1 - d, s1, s1 + d, 1 - d}, 0.0, 1.0);
      };
      QuadOptions o;
      o.rel_tol = 1e-8;
      const double v = integrate_pieces(outer, {1 - d}, 0.0, 1.0);
      const double err = std::abs(v - limit);
      CHECK(err < prev);
      prev = err;
    }
  }
}

TEST_CASE("weight functions") {
  auto c = WeightFn::constant(2.0, 1.5);
  CHECK(c(0.1, 0.2) == 2.0);
  CHECK(c.norm_1T() == 3.0);
  CHECK_FALSE(c.gamma_T().has_value());
  auto p = WeightFn::phi(HurstParam(0.75), 1.0);
  CHECK(p(0.0, 0.25) == doctest::Approx(0.75));
  CHECK(*p.gamma_T() == doctest::Approx(0.375));
  CHECK_THROWS_AS(WeightFn::phi(HurstParam(0.5), 1.0), RegimeError);
  auto e = WeightFn::eta_delta(HurstParam(0.75), 0.05, 1.0);
  CHECK(e(0.3, 0.5) == eta_delta(0.3, 0.5, 1.0, 0.05, HurstParam(0.75)));
  TimeGrid g(1.0, 2);
  auto tb = WeightFn::table(g, {1, 2, 3, 2, 4, 5, 3, 5, 6});
  CHECK(tb(0.25, 0.0) == doctest::Approx(1.5));
  CHECK(tb(0.5, 0.5) == doctest::Approx(4.0));
  CHECK_THROWS_AS(WeightFn::table(g, {1, 2, 3, 4, 4, 5, 3, 5, 6}), DataError);
}
