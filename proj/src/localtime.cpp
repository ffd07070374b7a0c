#include "fracheat/localtime.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fracheat/errors.hpp"
#include "fracheat/quadrature.hpp"

namespace fracheat {

namespace {

// exp(-r2/(2 eps)) below this exponent is dropped.
constexpr double kCutoff = 60.0;

double norm_factor(double eps, std::size_t d) {
  return std::pow(2.0 * std::numbers::pi * eps, -0.5 * static_cast<double>(d));
}

// Ladder bookkeeping: rungs sorted descending, and whether each is half the previous.
struct Ladder {
  std::vector<std::size_t> order;  // indices into eps, largest first
  std::vector<double> inv2e;
  bool halving = true;
  double top_inv2e = 0.0;

  explicit Ladder(std::span<const double> eps) {
    if (eps.empty()) throw ConfigError("eps ladder is empty");
    for (double e : eps)
      if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("mollifier eps must be > 0");
    order.resize(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return eps[a] > eps[b]; });
    for (std::size_t m = 0; m < order.size(); ++m) {
      inv2e.push_back(0.5 / eps[order[m]]);
      if (m > 0 && std::abs(eps[order[m - 1]] - 2.0 * eps[order[m]]) > 1e-12 * eps[order[m - 1]])
        halving = false;
    }
    top_inv2e = inv2e[0];
  }

  // acc[m] += w * exp(-r2 inv2e[m])
  void accumulate(double r2, double w, double* acc) const {
    const double x = r2 * top_inv2e;
    if (x > kCutoff) return;
    if (halving) {
      double e = std::exp(-x);
      acc[0] += w * e;
      for (std::size_t m = 1; m < inv2e.size(); ++m) {
        e *= e;
        acc[m] += w * e;
      }
    } else {
      for (std::size_t m = 0; m < inv2e.size(); ++m) acc[m] += w * std::exp(-r2 * inv2e[m]);
    }
  }

  // acc[m] += w * (exp(-r2a inv2e[m]) + exp(-r2b inv2e[m])); symmetric in (r2a, r2b)
  void accumulate2(double r2a, double r2b, double w, double* acc) const {
    const double xa = r2a * top_inv2e, xb = r2b * top_inv2e;
    if (xa > kCutoff && xb > kCutoff) return;
    if (halving) {
      double ea = xa > kCutoff ? 0.0 : std::exp(-xa);
      double eb = xb > kCutoff ? 0.0 : std::exp(-xb);
      acc[0] += w * (ea + eb);
      for (std::size_t m = 1; m < inv2e.size(); ++m) {
        ea *= ea;
        eb *= eb;
        acc[m] += w * (ea + eb);
      }
    } else {
      for (std::size_t m = 0; m < inv2e.size(); ++m)
        acc[m] += w * (std::exp(-r2a * inv2e[m]) + std::exp(-r2b * inv2e[m]));
    }
  }

  void finish(const double* acc, std::span<const double> eps, std::size_t d,
              std::span<double> out) const {
    for (std::size_t m = 0; m < order.size(); ++m)
      out[order[m]] = acc[m] * norm_factor(eps[order[m]], d);
  }
};

void check_pair(const PathView& a, const PathView& b, std::size_t n) {
  if (a.d != b.d) throw DataError("paths differ in dimension");
  if (a.n_nodes != b.n_nodes) throw DataError("paths are on different grids");
  if (a.n_nodes != n) throw DataError("path grid does not match the weight matrix");
}

double sq_dist(const PathView& a, std::size_t j, const PathView& b, std::size_t l) {
  double r2 = 0.0;
  for (std::size_t c = 0; c < a.d; ++c) {
    const double x = a.values[c * a.n_nodes + j] - b.values[c * b.n_nodes + l];
    r2 += x * x;
  }
  return r2;
}

void mark_diagonal(WeightMatrix& W) {
  const std::size_t N = W.n_nodes;
  W.symmetric = true;
  for (std::size_t j = 0; j < N && W.symmetric; ++j)
    for (std::size_t l = j + 1; l < N; ++l)
      if (W.w[j * N + l] != W.w[l * N + j]) {
        W.symmetric = false;
        break;
      }
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t l = 0; l < N; ++l)
      if (j != l && W.w[j * N + l] != 0.0) {
        W.diagonal = false;
        return;
      }
  W.diagonal = true;
}

void check_grid_horizon(const TimeGrid& grid, const WeightFn& w) {
  if (std::abs(grid.t_end() - w.t_end()) > 1e-12 * w.t_end())
    throw DataError("weight horizon differs from the path grid horizon");
}

}  // namespace

std::vector<double> trapezoid_weights(const TimeGrid& grid) {
  std::vector<double> w(grid.n_nodes(), grid.dt());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

WeightMatrix weight_matrix(const WeightFn& w, const TimeGrid& grid) {
  check_grid_horizon(grid, w);
  const std::size_t N = grid.n_nodes();
  const auto tw = trapezoid_weights(grid);
  WeightMatrix W;
  W.n_nodes = N;
  W.w.resize(N * N);
  if (w.kind() == WeightFn::Kind::Phi) {
    // dual cells [t_j - h/2, t_j + h/2] clipped to [0,T]
    const HurstParam H(w.hurst());
    const double h = grid.dt();
    std::vector<double> lo(N), hi(N);
    for (std::size_t j = 0; j < N; ++j) {
      lo[j] = j == 0 ? 0.0 : grid.node(j) - 0.5 * h;
      hi[j] = j + 1 == N ? grid.t_end() : grid.node(j) + 0.5 * h;
    }
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t l = j; l < N; ++l) {
        const double m = phi_rect_mass(lo[j], hi[j], lo[l], hi[l], H);
        W.w[j * N + l] = m;
        W.w[l * N + j] = m;
      }
  } else {
    const auto t = grid.nodes();
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t l = 0; l < N; ++l) W.w[j * N + l] = tw[j] * tw[l] * w(t[j], t[l]);
  }
  mark_diagonal(W);
  return W;
}

void pair_sums(const WeightMatrix& W, const PathView& a, const PathView& b,
               std::span<const double> eps, std::span<double> out) {
  check_pair(a, b, W.n_nodes);
  if (out.size() != eps.size()) throw DataError("output size differs from eps ladder");
  const Ladder L(eps);
  std::vector<double> acc(eps.size(), 0.0);
  const std::size_t N = W.n_nodes;
  if (W.diagonal) {
    for (std::size_t j = 0; j < N; ++j) L.accumulate(sq_dist(a, j, b, j), W.w[j * N + j], acc.data());
  } else if (W.symmetric) {
    // unordered pairs, so swapping a and b gives bit-identical sums
    for (std::size_t j = 0; j < N; ++j) {
      const double* row = W.w.data() + j * N;
      L.accumulate(sq_dist(a, j, b, j), row[j], acc.data());
      if (a.d == 1) {
        const double xj = a.values[j], yj = b.values[j];
        for (std::size_t l = j + 1; l < N; ++l) {
          const double r1 = xj - b.values[l], r2 = a.values[l] - yj;
          L.accumulate2(r1 * r1, r2 * r2, row[l], acc.data());
        }
      } else {
        for (std::size_t l = j + 1; l < N; ++l)
          L.accumulate2(sq_dist(a, j, b, l), sq_dist(a, l, b, j), row[l], acc.data());
      }
    }
  } else if (a.d == 1) {
    const double* x = a.values.data();
    const double* y = b.values.data();
    for (std::size_t j = 0; j < N; ++j) {
      const double* row = W.w.data() + j * N;
      for (std::size_t l = 0; l < N; ++l) {
        const double r = x[j] - y[l];
        L.accumulate(r * r, row[l], acc.data());
      }
    }
  } else {
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t l = 0; l < N; ++l) L.accumulate(sq_dist(a, j, b, l), W.w[j * N + l], acc.data());
  }
  L.finish(acc.data(), eps, a.d, out);
}

void self_sums(const WeightMatrix& W, const PathView& a, std::span<const double> eps,
               std::span<double> out) {
  check_pair(a, a, W.n_nodes);
  if (!W.symmetric) throw DataError("self-intersection sums need a symmetric weight matrix");
  if (out.size() != eps.size()) throw DataError("output size differs from eps ladder");
  const Ladder L(eps);
  std::vector<double> diag(eps.size(), 0.0), off(eps.size(), 0.0);
  const std::size_t N = W.n_nodes;
  for (std::size_t j = 0; j < N; ++j) L.accumulate(0.0, W.w[j * N + j], diag.data());
  if (!W.diagonal) {
    for (std::size_t j = 0; j < N; ++j) {
      const double* row = W.w.data() + j * N;
      for (std::size_t l = j + 1; l < N; ++l) L.accumulate(sq_dist(a, j, a, l), row[l], off.data());
    }
  }
  for (std::size_t m = 0; m < eps.size(); ++m) diag[m] += 2.0 * off[m];
  L.finish(diag.data(), eps, a.d, out);
}

void diagonal_sums(std::span<const double> w, const PathView& a, const PathView& b,
                   std::span<const double> eps, std::span<double> out) {
  check_pair(a, b, w.size());
  if (out.size() != eps.size()) throw DataError("output size differs from eps ladder");
  const Ladder L(eps);
  std::vector<double> acc(eps.size(), 0.0);
  for (std::size_t j = 0; j < w.size(); ++j) L.accumulate(sq_dist(a, j, b, j), w[j], acc.data());
  L.finish(acc.data(), eps, a.d, out);
}

LocalTimeSample intersection_lt(const PathView& b1, const PathView& b2, const TimeGrid& grid,
                                const WeightFn& w, const MollifierEps& m) {
  if (b1.d != b2.d) throw DataError("paths differ in dimension");
  if (static_cast<int>(b1.d) != m.d) throw DataError("mollifier dimension differs from path dimension");
  const WeightMatrix W = weight_matrix(w, grid);
  LocalTimeSample s;
  const double e[1] = {m.epsilon};
  pair_sums(W, b1, b2, e, std::span<double>(&s.value, 1));
  s.epsilon = m.epsilon;
  s.weight = w.describe();
  return s;
}

LocalTimeSample self_intersection_lt(const PathView& b, const TimeGrid& grid, const WeightFn& w,
                                     const MollifierEps& m, bool normalized) {
  if (b.d != 1 || m.d != 1)
    throw RegimeError("d = 1", "self-intersection local time is for one-dimensional motion");
  const WeightMatrix W = weight_matrix(w, grid);
  LocalTimeSample s;
  const double e[1] = {m.epsilon};
  self_sums(W, b, e, std::span<double>(&s.value, 1));
  if (normalized) s.value -= self_lt_mean(w, m.epsilon, grid.t_end());
  s.epsilon = m.epsilon;
  s.weight = w.describe();
  s.self = true;
  s.j = 0;
  return s;
}

namespace {

void check_frac_hurst(HurstParam H) {
  if (!(H.above_three_eighths() && H.h() <= 0.5))
    throw RegimeError("3/8 < H <= 1/2", "fractional-derivative local time");
}

WeightMatrix frac_matrix(const TimeGrid& grid, HurstParam H) {
  WeightMatrix W;
  W.n_nodes = grid.n_nodes();
  W.w = KStarOperator(grid, H).tensor_weights();
  // M^T diag(w) M is symmetric up to rounding
  const std::size_t N = W.n_nodes;
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t l = j + 1; l < N; ++l) {
      const double v = 0.5 * (W.w[j * N + l] + W.w[l * N + j]);
      W.w[j * N + l] = v;
      W.w[l * N + j] = v;
    }
  mark_diagonal(W);
  return W;
}

}  // namespace

LocalTimeSample frac_deriv_lt(const PathView& b1, const PathView& b2, const TimeGrid& grid,
                              HurstParam H, const MollifierEps& m, double T) {
  check_frac_hurst(H);
  if (b1.d != 1 || b2.d != 1 || m.d != 1)
    throw RegimeError("d = 1", "fractional-derivative local time is one-dimensional");
  if (std::abs(grid.t_end() - T) > 1e-12 * T) throw DataError("grid horizon differs from T");
  const WeightMatrix W = frac_matrix(grid, H);
  LocalTimeSample s;
  const double e[1] = {m.epsilon};
  pair_sums(W, b1, b2, e, std::span<double>(&s.value, 1));
  s.epsilon = m.epsilon;
  s.weight = "kstar:" + std::to_string(H.h());
  return s;
}

namespace {

// int_0^T int_0^T eta(s,t) g(s,t) dt ds with the inner integral split at t=s.
double weighted_double_integral(const WeightFn& w, double T,
                                const std::function<double(double, double)>& g) {
  const double alpha = w.kind() == WeightFn::Kind::Phi ? 2.0 * w.hurst() - 2.0 : 0.0;
  QuadOptions inner;
  inner.rel_tol = 1e-10;
  inner.abs_tol = 1e-14;
  QuadOptions outer;
  outer.rel_tol = 1e-9;
  outer.abs_tol = 1e-13;
  const bool phi = w.kind() == WeightFn::Kind::Phi;
  const HurstParam H(phi ? w.hurst() : 0.5);
  auto inner_fn = [&](double s) {
    // gap-exact phi so the diagonal singularity keeps precision
    auto f = [&](double t, double gap) {
      const double wt = phi ? H.h() * (2.0 * H.h() - 1.0) * std::pow(gap, 2.0 * H.h() - 2.0) : w(s, t);
      return wt * g(s, t);
    };
    double v = 0.0;
    if (s > 0.0)
      v += integrate_singular([&](double t, double, double db) { return f(t, db); }, 0.0, s, 0.0,
                              alpha, inner)
               .value;
    if (s < T)
      v += integrate_singular([&](double t, double da, double) { return f(t, da); }, s, T, alpha,
                              0.0, inner)
               .value;
    return v;
  };
  return integrate(inner_fn, 0.0, T, outer).value;
}

}  // namespace

double intersection_lt_mean(const WeightFn& w, double eps, double T, int d) {
  if (!(eps > 0.0)) throw ConfigError("mollifier eps must be > 0");
  return weighted_double_integral(w, T, [&](double s, double t) {
    return std::pow(2.0 * std::numbers::pi * (s + t + eps), -0.5 * d);
  });
}

double self_lt_mean(const WeightFn& w, double eps, double T) {
  if (!(eps > 0.0)) throw ConfigError("mollifier eps must be > 0");
  return weighted_double_integral(w, T, [&](double s, double t) {
    return 1.0 / std::sqrt(2.0 * std::numbers::pi * (std::abs(t - s) + eps));
  });
}

std::string variant_name(LtVariant v) {
  switch (v) {
    case LtVariant::Intersection: return "intersection";
    case LtVariant::Self: return "self";
    case LtVariant::SelfNormalized: return "self-normalized";
    case LtVariant::FracDeriv: return "frac-deriv";
    case LtVariant::Diagonal: return "diagonal";
  }
  return "?";
}

namespace {

void validate(const LtConfig& cfg) {
  if (!(cfg.T > 0.0)) throw ConfigError("T must be > 0");
  if (cfg.d < 1) throw ConfigError("d must be >= 1");
  if (cfg.n_samples < 2) throw ConfigError("n_samples must be >= 2 for a standard error");
  if (cfg.eps.empty()) throw ConfigError("eps ladder is empty");
  for (double e : cfg.eps)
    if (!(e > 0.0)) throw ConfigError("mollifier eps must be > 0");
  if (!(cfg.mesh_factor > 0.0)) throw ConfigError("mesh factor must be > 0");
  if (cfg.base_steps < 1) throw ConfigError("base_steps must be >= 1");
  switch (cfg.variant) {
    case LtVariant::Self:
    case LtVariant::SelfNormalized:
      if (cfg.d != 1)
        throw RegimeError("d = 1", "self-intersection local time is for one-dimensional motion");
      break;
    case LtVariant::FracDeriv:
      check_frac_hurst(HurstParam(cfg.hurst));
      if (cfg.d != 1)
        throw RegimeError("d = 1", "fractional-derivative local time is one-dimensional");
      break;
    default: break;
  }
  if (cfg.variant != LtVariant::FracDeriv && cfg.variant != LtVariant::Diagonal &&
      std::abs(cfg.weight.t_end() - cfg.T) > 1e-12 * cfg.T)
    throw ConfigError("weight horizon differs from T");
}

}  // namespace

TimeGrid lt_grid(const LtConfig& cfg) {
  if (cfg.n_steps) {
    if (*cfg.n_steps < 1) throw ConfigError("n_steps must be >= 1");
    return TimeGrid(cfg.T, *cfg.n_steps);
  }
  double h = *std::min_element(cfg.eps.begin(), cfg.eps.end()) / cfg.mesh_factor;
  if (cfg.variant != LtVariant::FracDeriv && cfg.variant != LtVariant::Diagonal &&
      cfg.weight.kind() == WeightFn::Kind::EtaDelta)
    h = std::min(h, cfg.weight.delta() / cfg.mesh_factor);
  const auto need = static_cast<std::size_t>(std::ceil(cfg.T / h - 1e-9));
  const std::size_t factor = std::max<std::size_t>(1, (need + cfg.base_steps - 1) / cfg.base_steps);
  return TimeGrid(cfg.T, cfg.base_steps * factor);
}

std::vector<double> LtSamples::rung(std::size_t r) const {
  std::vector<double> out(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) out[i] = at(i, r);
  return out;
}

LtSamples sample_local_times(const LtConfig& cfg) {
  validate(cfg);
  const TimeGrid grid = lt_grid(cfg);
  const TimeGrid base(cfg.T, cfg.base_steps);
  const std::size_t factor = grid.n_steps() % cfg.base_steps == 0 ? grid.n_steps() / cfg.base_steps : 0;
  const bool self = cfg.variant == LtVariant::Self || cfg.variant == LtVariant::SelfNormalized;
  const std::size_t k = self ? 1 : 2;
  const std::size_t R = cfg.eps.size();

  WeightMatrix W;
  std::vector<double> tw;
  if (cfg.variant == LtVariant::FracDeriv)
    W = frac_matrix(grid, HurstParam(cfg.hurst));
  else if (cfg.variant == LtVariant::Diagonal)
    tw = trapezoid_weights(grid);
  else
    W = weight_matrix(cfg.weight, grid);

  std::vector<double> centre(R, 0.0);
  if (cfg.variant == LtVariant::SelfNormalized)
    for (std::size_t r = 0; r < R; ++r) centre[r] = self_lt_mean(cfg.weight, cfg.eps[r], cfg.T);

  LtSamples out;
  out.eps = cfg.eps;
  out.n_samples = cfg.n_samples;
  out.values.assign(cfg.n_samples * R, 0.0);
  out.grid = grid;
  const RngConfig rng{cfg.seed};
  parallel_for(cfg.n_samples, cfg.threads, [&](std::size_t i) {
    const std::uint64_t sid = derive_stream(cfg.stream, i);
    PathBatch paths = factor > 0 ? sample_paths(base, k, cfg.d, rng, sid) : sample_paths(grid, k, cfg.d, rng, sid);
    if (factor > 1) paths = brownian_bridge_refine(paths, factor);
    std::span<double> v(out.values.data() + i * R, R);
    switch (cfg.variant) {
      case LtVariant::Intersection:
      case LtVariant::FracDeriv: pair_sums(W, paths.path(0), paths.path(1), cfg.eps, v); break;
      case LtVariant::Diagonal: diagonal_sums(tw, paths.path(0), paths.path(1), cfg.eps, v); break;
      case LtVariant::Self:
      case LtVariant::SelfNormalized:
        self_sums(W, paths.path(0), cfg.eps, v);
        for (std::size_t r = 0; r < R; ++r) v[r] -= centre[r];
        break;
    }
  });
  return out;
}

namespace {

double regularity(const LtConfig& cfg) {
  switch (cfg.variant) {
    case LtVariant::Diagonal: return 0.5;
    case LtVariant::FracDeriv: return cfg.hurst;
    default: break;
  }
  switch (cfg.weight.kind()) {
    case WeightFn::Kind::Phi:
    case WeightFn::Kind::EtaDelta: return cfg.weight.hurst();
    default: return 1.0;
  }
}

}  // namespace

LtMoments ladder_moments(const LtSamples& s, const LtConfig& cfg,
                         const std::function<double(double)>& f) {
  std::optional<double> delta;
  if (cfg.variant != LtVariant::FracDeriv && cfg.variant != LtVariant::Diagonal &&
      cfg.weight.kind() == WeightFn::Kind::EtaDelta)
    delta = cfg.weight.delta();
  const auto ex = s.eps.size() >= 2 ? richardson_exponents(regularity(cfg), cfg.d, s.eps.size())
                                    : std::vector<double>{};
  return estimate_ladder(
      s.n_samples, s.eps, ex, [&](std::size_t i, std::size_t r) { return f(s.at(i, r)); },
      cfg.seed, delta);
}

LtMoments lt_moment(const LtConfig& cfg, std::size_t k) {
  if (k < 1) throw ConfigError("moment order k must be >= 1");
  const auto s = sample_local_times(cfg);
  const double kk = static_cast<double>(k);
  return ladder_moments(s, cfg, [kk](double v) { return std::pow(v, kk); });
}

LtMoments lt_exp_moment(const LtConfig& cfg, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  const auto s = sample_local_times(cfg);
  return ladder_moments(s, cfg, [lambda](double v) { return std::exp(lambda * v); });
}

}  // namespace fracheat
