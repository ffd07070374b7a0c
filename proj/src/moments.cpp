#include "fracheat/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "fracheat/errors.hpp"
#include "fracheat/localtime.hpp"

namespace fracheat {

std::string rule_name(ProductRule r) {
  return r == ProductRule::Wick ? "wick" : "stratonovich";
}

namespace {

double default_gamma(HurstParam H) { return eta_delta_gamma(H); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::vector<double> origin_or(const std::vector<double>& x, int d) {
  if (x.empty()) return std::vector<double>(static_cast<std::size_t>(d), 0.0);
  return x;
}

// In-place lower Cholesky of a small SPD matrix; adds diagonal jitter on failure.
std::vector<double> cholesky_psd(std::vector<double> a, std::size_t n) {
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += a[i * n + i];
  const std::vector<double> orig = a;
  for (double jitter : {0.0, 1e-14, 1e-12, 1e-10, 1e-8}) {
    a = orig;
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += jitter * trace;
    bool ok = true;
    for (std::size_t j = 0; j < n && ok; ++j) {
      double s = a[j * n + j];
      for (std::size_t m = 0; m < j; ++m) s -= a[j * n + m] * a[j * n + m];
      if (s < 0.0) {
        if (s > -1e-12 * (trace + 1e-300)) s = 0.0;
        else ok = false;
      }
      const double l = std::sqrt(s);
      a[j * n + j] = l;
      for (std::size_t i = j + 1; i < n && ok; ++i) {
        double v = a[i * n + j];
        for (std::size_t m = 0; m < j; ++m) v -= a[i * n + m] * a[j * n + m];
        a[i * n + j] = l > 0.0 ? v / l : 0.0;
      }
      for (std::size_t i = 0; i < j; ++i) a[i * n + j] = 0.0;
    }
    if (ok) return a;
  }
  throw DataError("interaction Gram matrix is not positive semidefinite");
}

bool uses_weight_matrix(const FkConfig& cfg) {
  return cfg.hurst > 0.5 || cfg.delta.has_value();
}

WeightFn fk_weight(const FkConfig& cfg) {
  const HurstParam H(cfg.hurst);
  if (cfg.delta) return WeightFn::eta_delta(H, *cfg.delta, cfg.t);
  return WeightFn::phi(H, cfg.t);
}

std::string fk_route(const FkConfig& cfg) {
  std::string r = "fk-" + rule_name(cfg.rule) + ":";
  if (cfg.delta) return r + "eta_delta";
  return r + (cfg.hurst == 0.5 ? "diagonal" : "phi");
}

}  // namespace

void validate_fk(const FkConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("moment order k must be >= 1");
  if (!(cfg.t > 0.0)) throw ConfigError("t must be > 0");
  if (cfg.d < 1) throw ConfigError("d must be >= 1");
  if (!cfg.x.empty() && cfg.x.size() != static_cast<std::size_t>(cfg.d))
    throw ConfigError("x must have d coordinates");
  if (cfg.n_samples < 2) throw ConfigError("n_samples must be >= 2 for a standard error");
  if (cfg.eps.empty()) throw ConfigError("eps ladder is empty");
  for (double e : cfg.eps)
    if (!(e > 0.0)) throw ConfigError("mollifier eps must be > 0");
  if (cfg.delta && !(*cfg.delta > 0.0)) throw ConfigError("delta must be > 0");
  const HurstParam H(cfg.hurst);
  if (cfg.rule == ProductRule::Stratonovich) {
    if (!H.above_three_quarters())
      throw RegimeError("H > 3/4", "required for the Stratonovich equation, got H = " + fmt(H.h()));
    if (cfg.d != 1) throw RegimeError("d = 1", "Stratonovich moments are one-dimensional");
    return;
  }
  if (H.sub_half()) throw RegimeError("H >= 1/2", "Wick moments need H >= 1/2");
  if (H.is_half()) {
    if (cfg.d != 1) throw RegimeError("d = 1", "white-in-time noise needs d = 1");
    return;
  }
  if (!H.d_below_4h(cfg.d) || cfg.d > 2)
    throw RegimeError("d < 4H, d <= 2", "Wick moments for H > 1/2 need d in {1,2}");
  if (cfg.d == 2) {
    if (!cfg.beta_H) throw ConfigError("beta_H is required for d = 2");
    const double g = cfg.gamma_T.value_or(default_gamma(H));
    const double t0 = t0_of_k(cfg.k, H, cfg.d, g, *cfg.beta_H);
    if (!(cfg.t < t0))
      throw RegimeError("t < t0(k) for d = 2", "t0(" + std::to_string(cfg.k) + ") = " + fmt(t0) +
                                                   ", t = " + fmt(cfg.t));
  }
}

TimeGrid fk_grid(const FkConfig& cfg) {
  if (cfg.n_steps) {
    if (*cfg.n_steps < 1) throw ConfigError("n_steps must be >= 1");
    return TimeGrid(cfg.t, *cfg.n_steps);
  }
  double h = *std::min_element(cfg.eps.begin(), cfg.eps.end()) / cfg.mesh_factor;
  if (cfg.delta) h = std::min(h, *cfg.delta / cfg.mesh_factor);
  const auto need = static_cast<std::size_t>(std::ceil(cfg.t / h - 1e-9));
  const std::size_t factor = std::max<std::size_t>(1, (need + cfg.base_steps - 1) / cfg.base_steps);
  return TimeGrid(cfg.t, cfg.base_steps * factor);
}

FkSamples sample_fk(const FkConfig& cfg, FkSampleOptions opt) {
  validate_fk(cfg);
  if (opt.with_gaussian) opt.with_self = true;
  const TimeGrid grid = fk_grid(cfg);
  const TimeGrid base(cfg.t, cfg.base_steps);
  const std::size_t factor = grid.n_steps() % cfg.base_steps == 0 ? grid.n_steps() / cfg.base_steps : 0;
  const std::size_t R = cfg.eps.size(), k = cfg.k;
  const auto d = static_cast<std::size_t>(cfg.d);
  const auto x = origin_or(cfg.x, cfg.d);
  const bool matrix = uses_weight_matrix(cfg);
  WeightMatrix W;
  std::vector<double> tw;
  if (matrix) W = weight_matrix(fk_weight(cfg), grid);
  else tw = trapezoid_weights(grid);
  if (opt.with_self && !matrix) throw ConfigError("self-intersection terms need a weight matrix");

  FkSamples out;
  out.eps = cfg.eps;
  out.n_samples = cfg.n_samples;
  out.k = k;
  out.prefactor.assign(cfg.n_samples, 0.0);
  out.pair.assign(cfg.n_samples * R, 0.0);
  if (opt.with_self) out.self.assign(cfg.n_samples * R, 0.0);
  if (opt.with_gaussian) out.gaussian.assign(cfg.n_samples * R, 0.0);
  out.grid = grid;
  out.route = fk_route(cfg);

  const RngConfig rng{cfg.seed};
  parallel_for(cfg.n_samples, cfg.threads, [&](std::size_t i) {
    const std::uint64_t sid = derive_stream(cfg.stream, i);
    PathBatch paths = factor > 0 ? sample_paths(base, k, d, rng, sid) : sample_paths(grid, k, d, rng, sid);
    if (factor > 1) paths = brownian_bridge_refine(paths, factor);
    const std::size_t last = grid.n_steps();
    double pre = 1.0;
    std::vector<double> pos(d);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t c = 0; c < d; ++c) pos[c] = x[c] + paths.at(j, c, last);
      pre *= cfg.u0(pos);
    }
    out.prefactor[i] = pre;
    // S[(a*k+b)*R + r]
    std::vector<double> S(k * k * R, 0.0), v(R);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) {
        if (matrix) pair_sums(W, paths.path(a), paths.path(b), cfg.eps, v);
        else diagonal_sums(tw, paths.path(a), paths.path(b), cfg.eps, v);
        for (std::size_t r = 0; r < R; ++r) {
          out.pair[i * R + r] += v[r];
          S[(a * k + b) * R + r] = v[r];
          S[(b * k + a) * R + r] = v[r];
        }
      }
    if (opt.with_self) {
      for (std::size_t a = 0; a < k; ++a) {
        self_sums(W, paths.path(a), cfg.eps, v);
        for (std::size_t r = 0; r < R; ++r) {
          out.self[i * R + r] += v[r];
          S[(a * k + a) * R + r] = v[r];
        }
      }
    }
    if (opt.with_gaussian) {
      Stream noise(cfg.seed, derive_stream(sid, 0x5A17));
      std::vector<double> g(k);
      for (auto& z : g) z = noise.normal();
      for (std::size_t r = 0; r < R; ++r) {
        std::vector<double> m(k * k);
        for (std::size_t a = 0; a < k * k; ++a) m[a] = S[a * R + r];
        const auto L = cholesky_psd(std::move(m), k);
        double sum = 0.0;
        for (std::size_t a = 0; a < k; ++a)
          for (std::size_t b = 0; b <= a; ++b) sum += L[a * k + b] * g[b];
        out.gaussian[i * R + r] = std::exp(sum);
      }
    }
  });
  return out;
}

double wick_value(const FkSamples& s, std::size_t i, std::size_t r) {
  return s.prefactor[i] * std::exp(s.pair_at(i, r));
}

double stratonovich_value(const FkSamples& s, std::size_t i, std::size_t r, bool half_factor) {
  // 1/2 sum_{i,j} = sum_{i<j} + 1/2 sum_j;  sum_{i,j} = 2 sum_{i<j} + sum_j
  const double e = half_factor ? s.pair_at(i, r) + 0.5 * s.self_at(i, r)
                               : 2.0 * s.pair_at(i, r) + s.self_at(i, r);
  return s.prefactor[i] * std::exp(e);
}

FkResult fk_from_samples(const FkSamples& s, const FkConfig& cfg, ProductRule rule) {
  if (rule == ProductRule::Stratonovich && s.self.empty())
    throw ConfigError("Stratonovich moments need self-intersection samples");
  FkResult res;
  res.route = s.route;
  const auto ex = s.eps.size() >= 2 ? richardson_exponents(cfg.hurst, cfg.d, s.eps.size())
                                    : std::vector<double>{};
  const bool half = cfg.strat_half_factor;
  res.estimate = estimate_ladder(
      s.n_samples, s.eps, ex,
      [&](std::size_t i, std::size_t r) {
        return rule == ProductRule::Wick ? wick_value(s, i, r) : stratonovich_value(s, i, r, half);
      },
      cfg.seed, cfg.delta);
  if (cfg.d == 2 && cfg.beta_H) {
    const HurstParam H(cfg.hurst);
    res.t0 = t0_of_k(cfg.k, H, cfg.d, cfg.gamma_T.value_or(default_gamma(H)), *cfg.beta_H);
  }
  return res;
}

FkResult moment_wick(const FkConfig& cfg) {
  FkConfig c = cfg;
  c.rule = ProductRule::Wick;
  return fk_from_samples(sample_fk(c), c, ProductRule::Wick);
}

FkResult moment_stratonovich(const FkConfig& cfg) {
  FkConfig c = cfg;
  c.rule = ProductRule::Stratonovich;
  FkSampleOptions opt;
  opt.with_self = true;
  return fk_from_samples(sample_fk(c, opt), c, ProductRule::Stratonovich);
}

FkResult moment_fk(const FkConfig& cfg) {
  return cfg.rule == ProductRule::Wick ? moment_wick(cfg) : moment_stratonovich(cfg);
}

FactorizationCheck stratonovich_factorization(const FkConfig& cfg) {
  FkConfig c = cfg;
  c.rule = ProductRule::Stratonovich;
  c.eps = {*std::min_element(cfg.eps.begin(), cfg.eps.end())};
  FkSampleOptions opt;
  opt.with_gaussian = true;
  const auto s = sample_fk(c, opt);
  const std::size_t n = s.n_samples;
  std::vector<double> noise(n), half(n), full(n);
  for (std::size_t i = 0; i < n; ++i) {
    noise[i] = s.prefactor[i] * s.gaussian[i];
    half[i] = stratonovich_value(s, i, 0, true);
    full[i] = stratonovich_value(s, i, 0, false);
  }
  FactorizationCheck f;
  const auto a = summarize(noise), b = summarize(half), e = summarize(full);
  f.noise_mean = a.mean;
  f.noise_se = a.std_error;
  f.half_mean = b.mean;
  f.half_se = b.std_error;
  f.full_mean = e.mean;
  f.full_se = e.std_error;
  f.z_half = paired_z(noise, half);
  f.z_full = paired_z(noise, full);
  f.epsilon = c.eps[0];
  f.n_samples = n;
  return f;
}

AlphaSeries alpha_series_second_moment(HurstParam H, double t, double u0_const, std::size_t N,
                                       const AlphaConfig& cfg) {
  if (H.sub_half()) throw RegimeError("H >= 1/2", "alpha series");
  if (!(t > 0.0)) throw ConfigError("t must be > 0");
  if (N < 1) throw ConfigError("series length must be >= 1");
  AlphaSeries out;
  out.eps = cfg.eps;
  const std::size_t R = cfg.eps.size();
  std::vector<double> c(R, 1.0 / static_cast<double>(R));
  if (R >= 2) {
    out.exponents = richardson_exponents(H.h(), 1, R);
    c = richardson_weights(cfg.eps, out.exponents);
  } else {
    c = {1.0};
  }
  const double u2 = u0_const * u0_const;
  out.terms.push_back(u2);
  out.term_errors.push_back(0.0);
  double var = 0.0;
  double fact = 1.0;
  for (std::size_t k = 1; k <= N; ++k) {
    fact *= static_cast<double>(k);
    AlphaConfig ac = cfg;
    ac.qmc.stream = derive_stream(cfg.qmc.stream, k);
    const AlphaLadder lad = H.is_half() ? alpha_k_diagonal(t, k, ac)
                                        : alpha_k_ladder(WeightFn::phi(H, t), t, 1, k, ac);
    const auto [m, se] = lad.qmc.combine(c);
    out.terms.push_back(u2 * m / fact);
    out.term_errors.push_back(u2 * se / fact);
    var += (u2 * se / fact) * (u2 * se / fact);
  }
  for (double v : out.terms) out.sum += v;
  out.sum_error = std::sqrt(var);
  return out;
}

double phi_series(double x) {
  if (!(x >= 0.0)) throw ConfigError("Phi series argument must be >= 0");
  if (x == 0.0) return 0.0;
  const double lx = std::log(x);
  double sum = 0.0;
  for (std::size_t k = 1;; ++k) {
    const double kd = static_cast<double>(k);
    const double term = std::exp(kd * lx - std::lgamma(0.5 * (kd + 1.0)));
    sum += term;
    // terms decrease once k exceeds about 2x^2
    if (kd > 2.0 * x * x + 2.0 && term < 1e-16 * sum) break;
    if (k > 100000) break;
  }
  return sum;
}

double exp_moment_bound(double lambda, double T, double eta_norm) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(T > 0.0)) throw ConfigError("T must be > 0");
  if (!(eta_norm >= 0.0)) throw ConfigError("weight norm must be >= 0");
  return 1.0 + phi_series(0.5 * std::sqrt(T) * eta_norm * lambda);
}

double lambda0(double T, HurstParam H, int d, double gamma_T, double beta_H) {
  if (!H.super_half()) throw RegimeError("H > 1/2", "lambda0 is defined for H > 1/2");
  if (!H.d_below_4h(d)) throw RegimeError("d < 4H", "lambda0 needs d < 4H");
  if (!(T > 0.0)) throw ConfigError("T must be > 0");
  if (!(gamma_T > 0.0) || !(beta_H > 0.0)) throw ConfigError("gamma_T and beta_H must be > 0");
  const double h = H.h();
  return h * (2.0 * h - 1.0) * 4.0 * std::numbers::pi / (gamma_T * beta_H) *
         std::pow(T, 0.5 * d - 2.0 * h) * std::pow(std::tgamma(1.0 - d / (4.0 * h)), -2.0 * h);
}

double t0_of_k(std::size_t k, HurstParam H, int d, double gamma_T, double beta_H) {
  if (k < 1) throw ConfigError("k must be >= 1");
  const double at_one = lambda0(1.0, H, d, gamma_T, beta_H);
  if (k == 1) return std::numeric_limits<double>::infinity();
  const double target = 0.5 * static_cast<double>(k) * static_cast<double>(k - 1);
  // lambda0(T) = lambda0(1) T^e with e = d/2 - 2H < 0
  const double e = 0.5 * d - 2.0 * H.h();
  return std::pow(target / at_one, 1.0 / e);
}

NegativeMomentBound negative_moment_bound(double p, double t, std::span<const double> x,
                                          const U0& u0, HurstParam H, std::size_t n_samples,
                                          double eps, std::uint64_t seed, std::uint64_t stream,
                                          unsigned threads) {
  if (!H.above_three_quarters())
    throw RegimeError("H > 3/4", "negative-moment bound, got H = " + fmt(H.h()));
  if (x.size() > 1) throw RegimeError("d = 1", "negative-moment bound is one-dimensional");
  if (!(p > 0.0)) throw ConfigError("p must be > 0");
  if (!(t > 0.0)) throw ConfigError("t must be > 0");
  if (!(eps > 0.0)) throw ConfigError("mollifier eps must be > 0");
  if (n_samples < 2) throw ConfigError("n_samples must be >= 2 for a standard error");
  const double x0 = x.empty() ? 0.0 : x[0];
  const double xs[1] = {x0};
  const double mass = u0.heat_abs(t, xs);
  if (!(mass > 0.0)) throw DomainError("E|u0(x+B_t)| = 0");
  NegativeMomentBound out;
  out.kappa = std::pow(mass, -p - 1.0);

  LtConfig lc;
  lc.variant = LtVariant::Self;
  lc.weight = WeightFn::phi(H, t);
  lc.T = t;
  lc.eps = {2.0 * eps};
  const TimeGrid grid = lt_grid(lc);
  const TimeGrid base(t, lc.base_steps);
  const std::size_t factor = grid.n_steps() / lc.base_steps;
  const WeightMatrix W = weight_matrix(lc.weight, grid);
  std::vector<double> v(n_samples);
  const RngConfig rng{seed};
  parallel_for(n_samples, threads, [&](std::size_t i) {
    PathBatch b = sample_paths(base, 1, 1, rng, derive_stream(stream, i));
    if (factor > 1) b = brownian_bridge_refine(b, factor);
    double lt = 0.0;
    self_sums(W, b.path(0), lc.eps, std::span<double>(&lt, 1));
    const double xe[1] = {x0 + b.at(0, 0, grid.n_steps())};
    v[i] = out.kappa * std::abs(u0(xe)) * std::exp(0.5 * p * p * lt);
  });
  const auto s = summarize(v);
  out.bound = MomentEstimate{s.mean, s.std_error, n_samples, eps, std::nullopt, seed};
  return out;
}

double FieldWindow::t(std::size_t i) const {
  return t_max * static_cast<double>(i) / static_cast<double>(n_t);
}

double FieldWindow::x(std::size_t j) const {
  if (n_x == 0) return x_lo;
  return x_lo + (x_hi - x_lo) * static_cast<double>(j) / static_cast<double>(n_x);
}

namespace {

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

FieldSample sample_solution_field(const FieldConfig& cfg, std::uint64_t realization) {
  const HurstParam H(cfg.hurst);
  if (H.sub_half()) throw RegimeError("H >= 1/2", "field sampler needs H >= 1/2");
  if (cfg.rule == ProductRule::Stratonovich && !H.above_three_quarters())
    throw RegimeError("H > 3/4", "Stratonovich field, got H = " + fmt(H.h()));
  const FieldWindow& win = cfg.window;
  if (!(win.t_max > 0.0) || win.n_t < 1) throw ConfigError("field window needs t_max > 0, n_t >= 1");
  if (win.x_hi < win.x_lo) throw ConfigError("field window needs x_lo <= x_hi");
  if ((win.n_t + 1) * (win.n_x + 1) > 64 * 64) throw ConfigError("field window exceeds 64x64 nodes");
  if (!(cfg.eps > 0.0) || !(cfg.delta > 0.0)) throw ConfigError("field needs eps > 0, delta > 0");
  if (cfg.inner_B < 2) throw ConfigError("inner_B must be >= 2");
  if (cfg.path_steps_per_cell < 1) throw ConfigError("path_steps_per_cell must be >= 1");

  const std::size_t n_r = cfg.time_cells ? cfg.time_cells : 8 * win.n_t;
  if (n_r % win.n_t != 0) throw ConfigError("time_cells must be a multiple of n_t");
  const double dr = win.t_max / static_cast<double>(n_r);
  const std::size_t n_s = n_r * cfg.path_steps_per_cell;
  const double ds = win.t_max / static_cast<double>(n_s);
  const double se = std::sqrt(cfg.eps);
  const double dy = cfg.dy > 0.0 ? cfg.dy : 0.5 * se;
  const double reach = 6.0 * std::sqrt(win.t_max) + 8.0 * se;
  const double y_lo = win.x_lo - reach;
  const auto n_y = static_cast<std::size_t>(std::ceil((win.x_hi + reach - y_lo) / dy));

  // fGn cell covariance in time, lower Cholesky factor
  std::vector<double> L(n_r * n_r, 0.0);
  if (H.is_half()) {
    for (std::size_t a = 0; a < n_r; ++a) L[a * n_r + a] = std::sqrt(dr);
  } else {
    const double h2 = 2.0 * H.h();
    auto gam = [&](double m) {
      m = std::abs(m);
      return 0.5 * (std::pow(m + 1.0, h2) + std::pow(std::abs(m - 1.0), h2) - 2.0 * std::pow(m, h2)) *
             std::pow(dr, h2);
    };
    std::vector<double> G(n_r * n_r);
    for (std::size_t a = 0; a < n_r; ++a)
      for (std::size_t b = 0; b < n_r; ++b) G[a * n_r + b] = gam(static_cast<double>(a) - static_cast<double>(b));
    L = cholesky_psd(std::move(G), n_r);
  }

  // unit normals g[b * n_r + a]
  Stream noise(cfg.seed, derive_stream(cfg.stream, 2 * realization));
  std::vector<double> g(n_y * n_r);
  for (auto& z : g) z = noise.normal();
  const std::uint64_t path_parent = derive_stream(cfg.stream, 2 * realization + 1);

  const std::size_t NT = win.n_t + 1, NX = win.n_x + 1;
  const std::size_t per_node = n_s / win.n_t;
  std::vector<double> sum(NT * NX, 0.0), sum2(NT * NX, 0.0);
  std::vector<double> path(n_s + 1);
  std::vector<double> A(n_y * n_r, 0.0);  // A[b * n_r + a]
  std::vector<double> cdf, v(n_r);
  const double cut = 7.0 * se;

  for (std::size_t ib = 0; ib < cfg.inner_B; ++ib) {
    Stream ps(cfg.seed, derive_stream(path_parent, ib));
    fill_brownian(ps, ds, path);
    for (std::size_t it = 0; it < NT; ++it) {
      const std::size_t m_end = it * per_node;
      const double t = win.t(it);
      for (std::size_t jx = 0; jx < NX; ++jx) {
        const double x = win.x(jx);
        const double xe[1] = {x + path[m_end]};
        const double u0v = cfg.u0(xe);
        double Z = 0.0, alpha = 0.0;
        if (m_end > 0) {
          std::size_t b_min = n_y, b_max = 0, a_max = 0;
          for (std::size_t m = 0; m <= m_end; ++m) {
            const double s = static_cast<double>(m) * ds;
            const double ws = (m == 0 || m == m_end) ? 0.5 * ds : ds;
            // time window [t-s-delta, t-s] on [0,t]
            const double hi = t - s, lo = std::max(0.0, t - s - cfg.delta);
            if (!(hi > lo)) continue;
            const auto a0 = static_cast<std::size_t>(std::floor(lo / dr));
            const auto a1 = std::min(n_r, static_cast<std::size_t>(std::ceil(hi / dr)));
            const double c = x + path[m];
            const double fb = std::floor((c - cut - y_lo) / dy);
            const auto b0 = static_cast<std::size_t>(std::max(0.0, fb));
            const auto b1 = std::min(n_y, static_cast<std::size_t>(std::max(0.0, std::ceil((c + cut - y_lo) / dy))));
            if (b1 <= b0) continue;
            cdf.resize(b1 - b0 + 1);
            for (std::size_t b = b0; b <= b1; ++b)
              cdf[b - b0] = norm_cdf((y_lo + static_cast<double>(b) * dy - c) / se);
            b_min = std::min(b_min, b0);
            b_max = std::max(b_max, b1);
            for (std::size_t a = a0; a < a1; ++a) {
              const double ca = static_cast<double>(a) * dr;
              const double ov = std::min(hi, ca + dr) - std::max(lo, ca);
              if (ov <= 0.0) continue;
              a_max = std::max(a_max, a + 1);
              const double wa = ws * ov / (cfg.delta * dr * dy);
              for (std::size_t b = b0; b < b1; ++b) A[b * n_r + a] += wa * (cdf[b - b0 + 1] - cdf[b - b0]);
            }
          }
          const double sdy = std::sqrt(dy);
          for (std::size_t b = b_min; b < b_max; ++b) {
            double* col = A.data() + b * n_r;
            // v = L^T col over the active cells
            for (std::size_t a2 = 0; a2 < a_max; ++a2) {
              double acc = 0.0;
              for (std::size_t a = a2; a < a_max; ++a) acc += L[a * n_r + a2] * col[a];
              v[a2] = acc;
            }
            const double* gb = g.data() + b * n_r;
            for (std::size_t a2 = 0; a2 < a_max; ++a2) {
              Z += sdy * v[a2] * gb[a2];
              alpha += dy * v[a2] * v[a2];
            }
            std::fill(col, col + a_max, 0.0);
          }
        }
        const double u = cfg.rule == ProductRule::Wick ? u0v * std::exp(Z - 0.5 * alpha) : u0v * std::exp(Z);
        sum[it * NX + jx] += u;
        sum2[it * NX + jx] += u * u;
      }
    }
  }
  FieldSample out;
  out.window = win;
  out.realization = realization;
  out.inner_B = cfg.inner_B;
  out.values.resize(NT * NX);
  out.pair_moment.resize(NT * NX);
  const double M = static_cast<double>(cfg.inner_B);
  for (std::size_t i = 0; i < NT * NX; ++i) {
    out.values[i] = sum[i] / M;
    out.pair_moment[i] = (sum[i] * sum[i] - sum2[i]) / (M * (M - 1.0));
  }
  // B_0 = 0, so the t = 0 row is u0 itself
  for (std::size_t jx = 0; jx < NX; ++jx) {
    const double xs[1] = {win.x(jx)};
    out.values[jx] = cfg.u0(xs);
    out.pair_moment[jx] = out.values[jx] * out.values[jx];
  }
  return out;
}

}  // namespace fracheat
