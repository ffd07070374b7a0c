#include "fracheat/chaos.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "fracheat/errors.hpp"
#include "fracheat/rng.hpp"
#include "fracheat/stats.hpp"

namespace fracheat {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// 12 significant digits, no promotion to long double
using FastPolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>,
                                                 boost::math::policies::digits10<12>>;

double log_factorial(std::size_t k) { return std::lgamma(static_cast<double>(k) + 1.0); }

// Ordered times 0 < s_1 < ... < s_k < T with Dirichlet(a,...,a,1) gaps.
// Returns the log density on the ordered simplex.
double ordered_dirichlet(std::span<const double> u, double a, double T, std::span<double> s,
                         std::span<double> gaps) {
  const std::size_t k = s.size();
  double rem = 1.0, acc = 0.0, logq = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double b = static_cast<double>(k - 1 - i) * a + 1.0;
    const double x = a == 1.0 && b == 1.0 ? u[i] : boost::math::ibeta_inv(a, b, u[i], FastPolicy());
    const double g = rem * x;
    rem -= g;
    acc += g;
    gaps[i] = g * T;
    s[i] = acc * T;
    logq += (a - 1.0) * std::log(g);
  }
  const double kd = static_cast<double>(k);
  return logq + std::lgamma(kd * a + 1.0) - kd * std::lgamma(a) - kd * std::log(T);
}

// Lehmer decode of a uniform into a permutation of 0..k-1.
void permutation_from_uniform(double u, std::span<std::size_t> perm) {
  const std::size_t k = perm.size();
  double f = 1.0;
  for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
  auto idx = static_cast<std::uint64_t>(u * f);
  std::vector<std::size_t> pool(k);
  for (std::size_t i = 0; i < k; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::uint64_t fact = 1;
    for (std::size_t j = 2; j < k - i; ++j) fact *= j;
    const std::size_t pick = static_cast<std::size_t>(idx / fact) % pool.size();
    idx %= fact;
    perm[i] = pool[pick];
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
}

// s ~ marginal of phi/T^{2H} on [0,T]; t | s ~ |t-s|^{2H-2}.
void phi_pair(double u1, double u2, double h, double T, double& s, double& t) {
  const double e = 2.0 * h;
  auto F = [&](double x) { return 0.5 * (std::pow(x, e) - std::pow(1.0 - x, e) + 1.0); };
  double lo = 0.0, hi = 1.0, x = u1;
  for (int it = 0; it < 200; ++it) {
    const double fx = F(x) - u1;
    if (fx > 0) hi = x; else lo = x;
    const double dens = h * (std::pow(x, e - 1.0) + std::pow(1.0 - x, e - 1.0));
    double nx = x - fx / dens;
    if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
    if (std::abs(nx - x) < 1e-16) {
      x = nx;
      break;
    }
    x = nx;
    if (hi - lo < 1e-16) break;
  }
  const double q = e - 1.0;
  const double L = std::pow(x, q), R = std::pow(1.0 - x, q);
  const double pl = L / (L + R);
  if (u2 < pl) {
    const double w = u2 / pl;
    t = x * (1.0 - std::pow(w, 1.0 / q));
  } else {
    const double w = (u2 - pl) / (1.0 - pl);
    t = x + (1.0 - x) * std::pow(w, 1.0 / q);
  }
  s = x * T;
  t *= T;
}

void check_alpha_regime(const WeightFn& w, int d) {
  if (d < 1) throw ConfigError("dimension d must be >= 1");
  if (d == 1) return;
  const auto gamma = w.gamma_T();
  const double h = w.hurst();
  if (!gamma || !(d < 4.0 * h))
    throw RegimeError("d < 4H with eta <= gamma |s-t|^{2H-2}",
                      "d=" + std::to_string(d) + ", weight " + w.describe());
}

}  // namespace

GramMatrix GramMatrix::from_times(std::span<const double> s, std::span<const double> t,
                                  double eps) {
  if (s.size() != t.size()) throw DataError("Gram matrix: s and t lengths differ");
  GramMatrix g;
  g.k = s.size();
  g.entries.resize(g.k * g.k);
  for (std::size_t i = 0; i < g.k; ++i)
    for (std::size_t j = 0; j < g.k; ++j)
      g.entries[i * g.k + j] = std::min(s[i], s[j]) + std::min(t[i], t[j]) + (i == j ? eps : 0.0);
  return g;
}

std::optional<double> GramMatrix::log_det() const {
  std::vector<double> a = entries;
  double ld = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double diag = a[j * k + j];
    for (std::size_t p = 0; p < j; ++p) diag -= a[j * k + p] * a[j * k + p];
    if (!(diag > 0.0)) return std::nullopt;
    const double l = std::sqrt(diag);
    a[j * k + j] = l;
    ld += 2.0 * std::log(l);
    for (std::size_t i = j + 1; i < k; ++i) {
      double v = a[i * k + j];
      for (std::size_t p = 0; p < j; ++p) v -= a[i * k + p] * a[j * k + p];
      a[i * k + j] = v / l;
    }
  }
  return ld;
}

std::optional<double> log_psi_eps(std::span<const double> s, std::span<const double> t, int d,
                                  double eps) {
  const auto g = GramMatrix::from_times(s, t, eps);
  const auto ld = g.log_det();
  if (!ld) return std::nullopt;
  return -0.5 * d * (static_cast<double>(g.k) * kLog2Pi + *ld);
}

double psi(std::span<const double> s, std::span<const double> t, int d) {
  const auto l = log_psi_eps(s, t, d, 0.0);
  if (!l) throw SingularityError("psi: Gram matrix is singular");
  return std::exp(*l);
}

double psi_eps(std::span<const double> s, std::span<const double> t, int d, double eps) {
  if (eps < 0.0) throw DomainError("psi_eps needs eps >= 0");
  const auto l = log_psi_eps(s, t, d, eps);
  if (!l) {
    if (eps > 0.0) throw SingularityError("psi_eps: numerically singular Gram matrix");
    throw SingularityError("psi: Gram matrix is singular");
  }
  return std::exp(*l);
}

AlphaEstimate AlphaLadder::at(std::size_t j) const {
  AlphaEstimate a;
  a.k = k;
  a.value = qmc.mean(j);
  a.std_error = qmc.std_error(j);
  a.T = T;
  a.d = d;
  a.epsilon = eps[j];
  a.weight = weight;
  a.n_replicates = qmc.n_replicates;
  a.n_failures = qmc.n_failures;
  return a;
}

AlphaLadder alpha_k_ladder(const WeightFn& w, double T, int d, std::size_t k,
                           const AlphaConfig& cfg) {
  if (k < 1) throw ConfigError("alpha_k needs k >= 1");
  if (k > 12) throw ConfigError("alpha_k supports k <= 12");
  if (!(T > 0.0)) throw ConfigError("alpha_k needs T > 0");
  if (cfg.eps.empty()) throw ConfigError("alpha_k needs at least one eps rung");
  for (double e : cfg.eps)
    if (!(e >= 0.0)) throw ConfigError("alpha_k eps rungs must be >= 0");
  check_alpha_regime(w, d);
  if (w.kind() == WeightFn::Kind::Table && std::abs(w.t_end() - T) > 1e-12 * T)
    throw ConfigError("tabulated weight horizon differs from T");

  AlphaLadder out;
  out.k = k;
  out.T = T;
  out.d = d;
  out.weight = w.describe();
  out.eps = cfg.eps;
  const std::size_t m = cfg.eps.size();

  if (w.kind() == WeightFn::Kind::Phi) {
    const double h = w.hurst();
    const double scale = std::pow(std::pow(T, 2.0 * h), static_cast<double>(k));
    out.qmc = qmc_integrate(2 * k, m, cfg.qmc, [&](std::span<const double> u, std::span<double> o) {
      std::vector<double> s(k), t(k);
      for (std::size_t i = 0; i < k; ++i) phi_pair(u[2 * i], u[2 * i + 1], h, T, s[i], t[i]);
      for (std::size_t j = 0; j < m; ++j) {
        const auto lp = log_psi_eps(s, t, d, cfg.eps[j]);
        if (!lp) return false;
        o[j] = scale * std::exp(*lp);
      }
      return true;
    });
    return out;
  }

  const double a = cfg.gap_exponent > 0.0 ? cfg.gap_exponent : 1.0 - 0.25 * d;
  const double log_kk = 2.0 * log_factorial(k);
  out.qmc = qmc_integrate(2 * k + 1, m, cfg.qmc, [&](std::span<const double> u, std::span<double> o) {
    std::vector<double> s(k), ts(k), t(k), gs(k), gt(k);
    std::vector<std::size_t> perm(k);
    const double lq = ordered_dirichlet(u.subspan(0, k), a, T, s, gs) +
                      ordered_dirichlet(u.subspan(k, k), a, T, ts, gt);
    permutation_from_uniform(u[2 * k], perm);
    double weight = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      t[i] = ts[perm[i]];
      weight *= w(s[i], t[i]);
    }
    if (weight == 0.0) {
      for (double& v : o) v = 0.0;
      return true;
    }
    for (std::size_t j = 0; j < m; ++j) {
      const auto lp = log_psi_eps(s, t, d, cfg.eps[j]);
      if (!lp) return false;
      o[j] = weight * std::exp(*lp + log_kk - lq);
    }
    return true;
  });
  return out;
}

AlphaEstimate alpha_k(const WeightFn& w, double T, int d, std::size_t k, const QmcConfig& qmc) {
  AlphaConfig cfg;
  cfg.qmc = qmc;
  auto l = alpha_k_ladder(w, T, d, k, cfg);
  auto e = l.at(0);
  e.n_points = qmc.n_points;
  return e;
}

AlphaLadder alpha_k_diagonal(double T, std::size_t k, const AlphaConfig& cfg) {
  if (k < 1 || k > 20) throw ConfigError("diagonal alpha needs 1 <= k <= 20");
  if (!(T > 0.0)) throw ConfigError("diagonal alpha needs T > 0");
  AlphaLadder out;
  out.k = k;
  out.T = T;
  out.d = 1;
  out.weight = "diagonal";
  out.eps = cfg.eps;
  const std::size_t m = cfg.eps.size();
  const double a = cfg.gap_exponent > 0.0 ? cfg.gap_exponent : 0.5;
  const double lk = log_factorial(k);
  const double kd = static_cast<double>(k);
  out.qmc = qmc_integrate(k, m, cfg.qmc, [&](std::span<const double> u, std::span<double> o) {
    std::vector<double> s(k), g(k);
    const double lq = ordered_dirichlet(u, a, T, s, g);
    for (std::size_t j = 0; j < m; ++j) {
      // det(2 min(s) + eps I) = det(2 diag(g) + eps D D^T), D the difference operator
      const double e = cfg.eps[j];
      double fm2 = 1.0, fm1 = 2.0 * g[0] + e;
      for (std::size_t i = 1; i < k; ++i) {
        const double f = (2.0 * g[i] + 2.0 * e) * fm1 - e * e * fm2;
        fm2 = fm1;
        fm1 = f;
      }
      if (!(fm1 > 0.0)) return false;
      const double lp = -0.5 * (kd * kLog2Pi + std::log(fm1));
      o[j] = std::exp(lp + lk - lq);
    }
    return true;
  });
  return out;
}

double alpha_growth_bound(std::size_t k, double T, double eta_norm) {
  const double kd = static_cast<double>(k);
  return std::exp(log_factorial(k) - kd * std::log(2.0) + 0.5 * kd * std::log(T) +
                  kd * std::log(eta_norm) - std::lgamma(0.5 * (kd + 1.0)));
}

double alpha_diagonal_exact(std::size_t k, double T) {
  const double kd = static_cast<double>(k);
  return std::exp(log_factorial(k) - kd * std::log(2.0) + 0.5 * kd * std::log(T) -
                  std::lgamma(0.5 * kd + 1.0));
}

double critical_time_T0(HurstParam H, int d, double beta_H) {
  if (!H.super_half() || !H.d_below_4h(d))
    throw RegimeError("H > 1/2 and d < 4H", "T0 is defined only there");
  if (!(beta_H > 0.0)) throw ConfigError("beta_H must be > 0");
  const double h = H.h();
  const double g = std::tgamma(1.0 - d / (4.0 * h));
  return std::pow(beta_H * std::pow(g, 2.0 * h), -1.0 / (2.0 * h - 1.0));
}

ChaosTerm fn_norm_sq(std::size_t n, HurstParam H, int d, double t, const U0& u0,
                     std::span<const double> x, const ChaosConfig& cfg) {
  if (!(t > 0.0)) throw ConfigError("chaos norms need t > 0");
  std::vector<double> origin(static_cast<std::size_t>(std::max(d, 1)), 0.0);
  std::span<const double> xx = x.empty() ? std::span<const double>(origin) : x;
  if (static_cast<int>(xx.size()) != d) throw DataError("point x has the wrong dimension");
  ChaosTerm r;
  if (n == 0) {
    const double v = u0.heat(t, xx);
    r.value = v * v;
    r.exact = true;
    return r;
  }
  if (H.sub_half()) throw RegimeError("H >= 1/2", "chaos norms are not available for H < 1/2");
  const double K2 = u0.sup_norm() * u0.sup_norm();
  r.upper_bound = !u0.is_constant();
  if (H.is_half()) {
    if (d != 1) throw RegimeError("d = 1 for H = 1/2", "chaos norms are infinite for d >= 2");
    if (cfg.method != NormMethod::QuasiMC) {
      r.value = K2 * alpha_diagonal_exact(n, t);
      r.exact = true;
      return r;
    }
    AlphaConfig ac;
    ac.qmc = cfg.qmc;
    ac.qmc.stream = derive_stream(cfg.qmc.stream, n);
    ac.gap_exponent = 0.75;
    auto l = alpha_k_diagonal(t, n, ac);
    r.value = K2 * l.qmc.mean(0);
    r.std_error = K2 * l.qmc.std_error(0);
    return r;
  }
  if (!H.d_below_4h(d)) throw RegimeError("d < 4H", "chaos norms are infinite");
  if (cfg.method == NormMethod::ClosedForm)
    throw ConfigError("no closed form for chaos norms when H > 1/2");
  QmcConfig q = cfg.qmc;
  q.stream = derive_stream(cfg.qmc.stream, n);
  auto a = alpha_k(WeightFn::phi(H, t), t, d, n, q);
  r.value = K2 * a.value;
  r.std_error = K2 * a.std_error;
  return r;
}

ChaosSeries second_moment_series(HurstParam H, int d, double t, const U0& u0, std::size_t N,
                                 const ChaosConfig& cfg, std::span<const double> x) {
  if (N < 2) throw ConfigError("series truncation must be >= 2");
  if (!(t > 0.0)) throw ConfigError("series needs t > 0");
  if (H.sub_half()) throw RegimeError("H >= 1/2", "the chaos series is not available for H < 1/2");
  ChaosSeries out;
  out.hurst = H.h();
  out.d = d;
  out.t = t;
  out.u0 = u0.describe();
  out.truncation = N;
  if (d == 1) {
    // convergent for all t
  } else if (d == 2) {
    if (!H.super_half()) throw RegimeError("d < 4H", "d = 2 needs H > 1/2");
    if (!cfg.beta_H) throw ConfigError("d = 2 series needs beta_H");
    const double T0 = critical_time_T0(H, d, *cfg.beta_H);
    out.T0 = T0;
    if (t >= T0) {
      std::ostringstream os;
      os.precision(10);
      os << "t=" << t << " >= T0=" << T0;
      throw RegimeError("t < T0 for d = 2", os.str());
    }
  } else {
    throw RegimeError("d <= 2", "the series is established for d = 1 and small-time d = 2 only");
  }
  double lf = 0.0;
  for (std::size_t n = 0; n <= N; ++n) {
    if (n > 0) lf += std::log(static_cast<double>(n));
    const auto term = fn_norm_sq(n, H, d, t, u0, x, cfg);
    const double f = std::exp(-lf);
    out.terms.push_back(term.value * f);
    out.term_errors.push_back(term.std_error * f);
    out.upper_bound = out.upper_bound || term.upper_bound;
  }
  const double last = out.terms[N], prev = out.terms[N - 1];
  out.tail_ratio = prev > 0.0 ? last / prev : 0.0;
  double err2 = 0.0;
  for (double e : out.term_errors) err2 += e * e;
  out.sum_error = std::sqrt(err2);
  if (out.tail_ratio >= 1.0) {
    out.divergence_suspected = true;
    out.tail_estimate = std::numeric_limits<double>::infinity();
    out.sum = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.tail_estimate = last * out.tail_ratio / (1.0 - out.tail_ratio);
  KahanSum s;
  for (double v : out.terms) s.add(v);
  s.add(out.tail_estimate);
  out.sum = s.value();
  return out;
}

}  // namespace fracheat
