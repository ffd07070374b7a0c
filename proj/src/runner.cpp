#include "fracheat/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>

#include "fracheat/chaos.hpp"
#include "fracheat/errors.hpp"
#include "fracheat/localtime.hpp"
#include "fracheat/moments.hpp"
#include "fracheat/rng.hpp"

namespace fracheat {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::optional<double> first(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  if (v.size() > 1) throw ConfigError("expected a single value, got a list of " + std::to_string(v.size()));
  return v[0];
}

std::size_t count(const ExperimentConfig& c, const std::string& key, long long min) {
  const long long v = c.integer(key);
  if (v < min)
    throw ConfigError("'" + c.resolve_key(key) + "' must be >= " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

unsigned threads_of(const ExperimentConfig& c) { return static_cast<unsigned>(count(c, "threads", 1)); }

int dim_of(const ExperimentConfig& c) { return static_cast<int>(count(c, "d", 1)); }

WeightFn make_weight(const std::string& text, double H, std::optional<double> delta, double T) {
  if (text == "phi") return WeightFn::phi(HurstParam(H), T);
  if (text == "eta" || text.rfind("eta:", 0) == 0) {
    std::optional<double> dl = delta;
    if (text.size() > 4) dl = first(parse_list(text.substr(4)));
    if (!dl) throw ConfigError("weight 'eta' needs delta");
    return WeightFn::eta_delta(HurstParam(H), *dl, T);
  }
  if (text == "const") return WeightFn::constant(1.0, T);
  if (text.rfind("const:", 0) == 0) return WeightFn::constant(*first(parse_list(text.substr(6))), T);
  throw ConfigError("unknown weight '" + text + "' (const:C, phi, eta[:delta])");
}

ProductRule make_rule(const std::string& s) {
  if (s == "wick" || s == "skorohod") return ProductRule::Wick;
  if (s == "stratonovich") return ProductRule::Stratonovich;
  throw ConfigError("unknown product '" + s + "' (wick, stratonovich)");
}

LtVariant make_variant(const std::string& s) {
  for (auto v : {LtVariant::Intersection, LtVariant::Self, LtVariant::SelfNormalized,
                 LtVariant::FracDeriv, LtVariant::Diagonal})
    if (variant_name(v) == s) return v;
  throw ConfigError("unknown local-time variant '" + s + "'");
}

std::vector<double> point_of(const ExperimentConfig& c, const std::string& key, int d) {
  auto x = c.list(key);
  if (!x.empty() && x.size() != static_cast<std::size_t>(d))
    throw ConfigError("'" + c.resolve_key(key) + "' must have d = " + std::to_string(d) + " coordinates");
  return x;
}

void add_ladder(Report& rep, const std::string& quantity, const LadderEstimate& est,
                const std::string& route, std::uint64_t seed) {
  for (const auto& r : est.rungs)
    rep.records.push_back({quantity, r.value, r.std_error, r.epsilon, r.delta, r.n_samples, seed, route});
  if (est.extrapolated) {
    const auto& e = *est.extrapolated;
    rep.records.push_back(
        {quantity, e.value, e.std_error, 0.0, e.delta, e.n_samples, seed, route + ":richardson"});
  }
}

const MomentEstimate& best(const LadderEstimate& est) {
  return est.extrapolated ? *est.extrapolated : est.rungs.back();
}

FkConfig fk_config(const ExperimentConfig& c, const std::string& kind, std::size_t k) {
  FkConfig f;
  f.k = k;
  f.hurst = c.real("H");
  f.d = dim_of(c);
  f.t = c.real("t");
  f.u0 = U0::parse(c.get("u0"));
  f.eps = c.list("eps");
  f.delta = first(c.list("delta"));
  f.n_samples = count(c, "samples", 2);
  f.seed = c.u64("seed");
  f.stream = experiment_stream(kind, 0);
  f.threads = threads_of(c);
  f.beta_H = c.opt_real("beta_H");
  return f;
}

ChaosConfig chaos_config(const ExperimentConfig& c, const std::string& kind) {
  ChaosConfig cc;
  cc.qmc.n_points = count(c, "points", 2);
  if (c.kind() == "chaos") {
    cc.qmc.n_replicates = count(c, "replicates", 2);
    const std::string m = c.get("method");
    if (m == "auto") cc.method = NormMethod::Auto;
    else if (m == "closed-form") cc.method = NormMethod::ClosedForm;
    else if (m == "qmc") cc.method = NormMethod::QuasiMC;
    else throw ConfigError("unknown chaos method '" + m + "' (auto, closed-form, qmc)");
    cc.beta_H = c.opt_real("beta_H");
  }
  cc.qmc.seed = c.u64("seed");
  cc.qmc.stream = experiment_stream(kind, 1);
  cc.qmc.threads = threads_of(c);
  return cc;
}

void add_series(Report& rep, const ChaosSeries& s, const ChaosConfig& cc, std::uint64_t seed) {
  bool all_exact = true;
  for (double e : s.term_errors) all_exact = all_exact && e == 0.0;
  const std::size_t n = all_exact ? 0 : cc.qmc.n_points * cc.qmc.n_replicates;
  rep.records.push_back({"E[u^2]", s.sum, s.sum_error, std::nullopt, std::nullopt, n, seed, "chaos:series"});
  rep.diagnostics["chaos_tail_ratio"] = s.tail_ratio;
  rep.diagnostics["chaos_truncation"] = static_cast<double>(s.truncation);
  if (s.T0) rep.diagnostics["T0"] = *s.T0;
  if (s.divergence_suspected) rep.notes.push_back("chaos series: divergence suspected");
  if (s.upper_bound) rep.notes.push_back("chaos series: terms are upper bounds");
}

Report run_localtime(const ExperimentConfig& c) {
  LtConfig lc;
  lc.variant = make_variant(c.get("variant"));
  lc.hurst = c.real("H");
  lc.d = dim_of(c);
  lc.T = c.real("T");
  lc.eps = c.list("eps");
  lc.weight = make_weight(c.get("weight"), lc.hurst, first(c.list("delta")), lc.T);
  lc.n_samples = count(c, "samples", 2);
  lc.seed = c.u64("seed");
  lc.stream = experiment_stream("localtime", 0);
  lc.threads = threads_of(c);
  lc.mesh_factor = c.real("mesh_factor");
  if (const auto n = count(c, "n_steps", 0); n > 0) lc.n_steps = n;
  const std::size_t k = count(c, "k", 1);
  const auto lambda = c.opt_real("lambda");

  Report rep;
  const LtSamples s = sample_local_times(lc);
  const std::string route = "lt:" + variant_name(lc.variant) + ":" + lc.weight.describe();
  add_ladder(rep, "E[L^" + std::to_string(k) + "]",
             ladder_moments(s, lc, [k](double v) { return std::pow(v, static_cast<double>(k)); }),
             route, lc.seed);
  if (lambda) {
    const double lam = *lambda;
    add_ladder(rep, "E[exp(" + short_num(lam) + " L)]",
               ladder_moments(s, lc, [lam](double v) { return std::exp(lam * v); }), route, lc.seed);
    if (lc.variant == LtVariant::Intersection)
      rep.diagnostics["exp_moment_bound"] = exp_moment_bound(lam, lc.T, lc.weight.norm_1T());
  }
  rep.diagnostics["n_steps"] = static_cast<double>(s.grid.n_steps());
  return rep;
}

Report run_alpha(const ExperimentConfig& c) {
  const double T = c.real("T");
  const int d = dim_of(c);
  const std::size_t k = count(c, "k", 1);
  AlphaConfig ac;
  ac.qmc.n_points = count(c, "points", 2);
  ac.qmc.n_replicates = count(c, "replicates", 2);
  ac.qmc.seed = c.u64("seed");
  ac.qmc.stream = experiment_stream("alpha", 0);
  ac.qmc.threads = threads_of(c);
  ac.eps = c.list("eps");
  const bool diag = c.flag("diagonal");
  const WeightFn w = make_weight(c.get("weight"), c.real("H"), first(c.list("delta")), T);

  Report rep;
  const AlphaLadder L = diag ? alpha_k_diagonal(T, k, ac) : alpha_k_ladder(w, T, d, k, ac);
  const std::string route = diag ? "alpha:diagonal" : "alpha:qmc:" + w.describe();
  for (std::size_t j = 0; j < L.eps.size(); ++j) {
    const AlphaEstimate e = L.at(j);
    rep.records.push_back({"alpha_" + std::to_string(k), e.value, e.std_error, e.epsilon, std::nullopt,
                           e.n_points * e.n_replicates, ac.qmc.seed, route});
  }
  if (diag)
    rep.diagnostics["alpha_diagonal_exact"] = alpha_diagonal_exact(k, T);
  else
    rep.diagnostics["alpha_growth_bound"] = alpha_growth_bound(k, T, w.norm_1T());
  rep.diagnostics["qmc_failures"] = static_cast<double>(L.qmc.n_failures);
  return rep;
}

Report run_chaos(const ExperimentConfig& c) {
  const int d = dim_of(c);
  const ChaosConfig cc = chaos_config(c, "chaos");
  const auto x = point_of(c, "x", d);
  Report rep;
  const ChaosSeries s = second_moment_series(HurstParam(c.real("H")), d, c.real("t"), U0::parse(c.get("u0")),
                                             count(c, "N", 2), cc, x);
  add_series(rep, s, cc, cc.qmc.seed);
  for (std::size_t n = 0; n < s.terms.size(); ++n)
    rep.records.push_back({"chaos_term_" + std::to_string(n), s.terms[n], s.term_errors[n], std::nullopt,
                           std::nullopt, s.term_errors[n] == 0.0 ? 0 : cc.qmc.n_points * cc.qmc.n_replicates,
                           cc.qmc.seed, "chaos:term"});
  return rep;
}

Report run_moment(const ExperimentConfig& c) {
  FkConfig f = fk_config(c, "moment", count(c, "k", 1));
  f.x = point_of(c, "x", f.d);
  f.rule = make_rule(c.get("product"));
  f.strat_half_factor = c.flag("strat_half");
  f.gamma_T = c.opt_real("gamma_T");
  f.mesh_factor = c.real("mesh_factor");
  validate_fk(f);
  Report rep;
  const FkResult r = moment_fk(f);
  add_ladder(rep, "E[u^" + std::to_string(f.k) + "]", r.estimate, r.route, f.seed);
  if (r.t0) rep.diagnostics["t0_k"] = *r.t0;
  rep.diagnostics["n_steps"] = static_cast<double>(fk_grid(f).n_steps());
  return rep;
}

Report run_field(const ExperimentConfig& c) {
  FieldConfig fc;
  fc.window.t_max = c.real("t_max");
  fc.window.n_t = count(c, "n_t", 1);
  fc.window.x_lo = c.real("x_lo");
  fc.window.x_hi = c.real("x_hi");
  fc.window.n_x = count(c, "n_x", 0);
  fc.hurst = c.real("H");
  fc.u0 = U0::parse(c.get("u0"));
  fc.eps = *first(c.list("eps"));
  if (const auto dl = first(c.list("delta"))) fc.delta = *dl;
  fc.inner_B = count(c, "inner_B", 2);
  fc.seed = c.u64("seed");
  fc.stream = experiment_stream("field", 0);
  fc.rule = make_rule(c.get("product"));
  fc.time_cells = count(c, "time_cells", 0);
  const std::size_t R = count(c, "realizations", 2);
  const auto p = c.opt_real("p");
  const unsigned threads = threads_of(c);
  if (p) {
    if (!(*p > 0.0)) throw ConfigError("p must be > 0");
    if (!HurstParam(fc.hurst).above_three_quarters())
      throw RegimeError("H > 3/4", "the negative-moment bound needs H > 3/4");
  }
  // the first realization validates the configuration before the fan-out
  std::vector<FieldSample> fs(R, FieldSample{});
  fs[0] = sample_solution_field(fc, 0);
  parallel_for(R - 1, threads, [&](std::size_t r) { fs[r + 1] = sample_solution_field(fc, r + 1); });

  Report rep;
  const auto& w = fc.window;
  const std::string route = "field:" + rule_name(fc.rule);
  std::vector<double> col(R);
  for (std::size_t i = 0; i <= w.n_t; ++i) {
    for (std::size_t j = 0; j <= w.n_x; ++j) {
      const std::string at = "(t=" + short_num(w.t(i)) + ",x=" + short_num(w.x(j)) + ")";
      for (std::size_t r = 0; r < R; ++r) col[r] = fs[r].at(i, j);
      auto s = summarize(col);
      rep.records.push_back({"E[u]" + at, s.mean, s.std_error, fc.eps, fc.delta, R, fc.seed, route});
      for (std::size_t r = 0; r < R; ++r) col[r] = fs[r].pair_at(i, j);
      s = summarize(col);
      rep.records.push_back({"E[u^2]" + at, s.mean, s.std_error, fc.eps, fc.delta, R, fc.seed, route});
    }
  }
  if (p) {
    const std::size_t n_bound = count(c, "samples", 2);
    for (std::size_t j = 0; j <= w.n_x; ++j) {
      const std::string at = "(t=" + short_num(w.t_max) + ",x=" + short_num(w.x(j)) + ")";
      for (std::size_t r = 0; r < R; ++r) col[r] = std::pow(std::abs(fs[r].at(w.n_t, j)), -*p);
      const auto s = summarize(col);
      rep.records.push_back({"E[|u|^-" + short_num(*p) + "]" + at, s.mean, s.std_error, fc.eps, fc.delta, R,
                             fc.seed, route});
      const double xj = w.x(j);
      const auto b = negative_moment_bound(*p, w.t_max, std::span<const double>(&xj, 1), fc.u0,
                                           HurstParam(fc.hurst), n_bound, fc.eps, fc.seed,
                                           experiment_stream("field", 1), threads);
      rep.records.push_back({"negative_moment_bound" + at, b.bound.value, b.bound.std_error, fc.eps,
                             std::nullopt, n_bound, fc.seed, "bound:self-lt"});
    }
  }
  rep.diagnostics["realizations"] = static_cast<double>(R);
  return rep;
}

Report run_bounds(const ExperimentConfig& c) {
  const double T = c.real("T");
  const double H = c.real("H");
  const int d = dim_of(c);
  const auto lambdas = c.list("lambda");
  const auto p = c.opt_real("p");
  LtConfig lc;
  lc.variant = LtVariant::Intersection;
  lc.hurst = H;
  lc.d = d;
  lc.T = T;
  lc.eps = c.list("eps");
  lc.weight = make_weight(c.get("weight"), H, first(c.list("delta")), T);
  lc.n_samples = count(c, "samples", 2);
  lc.seed = c.u64("seed");
  lc.stream = experiment_stream("bounds", 0);
  lc.threads = threads_of(c);
  const HurstParam Hp(H);
  if (p) {
    if (!(*p > 0.0)) throw ConfigError("p must be > 0");
    if (!Hp.above_three_quarters()) throw RegimeError("H > 3/4", "the negative-moment bound needs H > 3/4");
  }

  Report rep;
  if (!lambdas.empty()) {
    const LtSamples s = sample_local_times(lc);
    for (double lam : lambdas) {
      const std::string q = "E[exp(" + short_num(lam) + " I)]";
      add_ladder(rep, q, ladder_moments(s, lc, [lam](double v) { return std::exp(lam * v); }),
                 "lt:intersection:" + lc.weight.describe(), lc.seed);
      rep.records.push_back({"exp_moment_bound(" + short_num(lam) + ")",
                             exp_moment_bound(lam, T, lc.weight.norm_1T()), 0.0, std::nullopt, std::nullopt, 0,
                             lc.seed, "bound:phi-series"});
    }
  }
  if (Hp.super_half() && Hp.d_below_4h(d)) {
    if (const auto beta = c.opt_real("beta_H")) {
      const double gamma = c.opt_real("gamma_T").value_or(eta_delta_gamma(Hp));
      rep.diagnostics["lambda0"] = lambda0(T, Hp, d, gamma, *beta);
      rep.diagnostics["t0_k"] = t0_of_k(count(c, "k", 1), Hp, d, gamma, *beta);
      if (d == 2) rep.diagnostics["T0"] = critical_time_T0(Hp, d, *beta);
    }
  }
  if (p) {
    if (lc.eps.empty()) throw ConfigError("eps ladder is empty");
    const double t = c.real("t");
    const U0 u0 = U0::parse(c.get("u0"));
    const std::vector<double> x(static_cast<std::size_t>(d), 0.0);
    const auto b = negative_moment_bound(*p, t, x, u0, Hp, lc.n_samples, lc.eps.front(), lc.seed,
                                         experiment_stream("bounds", 1), lc.threads);
    rep.records.push_back({"negative_moment_bound", b.bound.value, b.bound.std_error, lc.eps.front(),
                           std::nullopt, lc.n_samples, lc.seed, "bound:self-lt"});
    rep.diagnostics["kappa"] = b.kappa;
  }
  return rep;
}

Report run_crosscheck(const ExperimentConfig& c) {
  const std::string target = c.get("target");
  if (target == "second-moment") {
    FkConfig f = fk_config(c, "crosscheck", 2);
    validate_fk(f);
    const ChaosConfig cc = chaos_config(c, "crosscheck");
    const std::size_t N = count(c, "N", 2);
    Report rep;
    const ChaosSeries s = second_moment_series(HurstParam(f.hurst), f.d, f.t, f.u0, N, cc);
    add_series(rep, s, cc, f.seed);
    const FkResult r = moment_fk(f);
    add_ladder(rep, "E[u^2]", r.estimate, r.route, f.seed);
    const MomentEstimate& fk = best(r.estimate);
    rep.diagnostics["z_chaos_fk"] = combined_z(s.sum, s.sum_error, fk.value, fk.std_error);
    if (r.t0) rep.diagnostics["t0_k"] = *r.t0;
    if (f.hurst == 0.5 && f.d == 1 && f.u0.is_constant()) {
      AlphaConfig ac;
      ac.qmc = cc.qmc;
      ac.qmc.stream = experiment_stream("crosscheck", 2);
      ac.eps = c.list("alpha_eps");
      const std::vector<double> origin{0.0};
      const AlphaSeries a = alpha_series_second_moment(HurstParam(f.hurst), f.t, f.u0(origin), N, ac);
      rep.records.push_back({"E[u^2]", a.sum, a.sum_error, 0.0, std::nullopt,
                             ac.qmc.n_points * ac.qmc.n_replicates, f.seed, "alpha-series:richardson"});
      rep.diagnostics["z_chaos_alpha"] = combined_z(s.sum, s.sum_error, a.sum, a.sum_error);
      rep.diagnostics["z_alpha_fk"] = combined_z(a.sum, a.sum_error, fk.value, fk.std_error);
    }
    return rep;
  }
  if (target == "stratonovich-factor") {
    FkConfig f = fk_config(c, "crosscheck", count(c, "k", 2));
    f.rule = ProductRule::Stratonovich;
    validate_fk(f);
    const FactorizationCheck fc = stratonovich_factorization(f);
    Report rep;
    const double e = fc.epsilon;
    rep.records.push_back({"E[exp(1'Z)]", fc.noise_mean, fc.noise_se, e, f.delta, fc.n_samples, f.seed,
                           "strat-factor:noise"});
    rep.records.push_back({"E[u^k]", fc.half_mean, fc.half_se, e, f.delta, fc.n_samples, f.seed,
                           "strat-factor:half"});
    rep.records.push_back({"E[u^k]", fc.full_mean, fc.full_se, e, f.delta, fc.n_samples, f.seed,
                           "strat-factor:full"});
    rep.diagnostics["z_half"] = fc.z_half;
    rep.diagnostics["z_full"] = fc.z_full;
    return rep;
  }
  throw ConfigError("unknown crosscheck target '" + target + "' (second-moment, stratonovich-factor)");
}

}  // namespace

std::uint64_t experiment_stream(const std::string& kind, std::uint64_t index) {
  return derive_stream(fnv1a(ExperimentConfig::canonical_kind(kind)), index);
}

Report run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const std::string& k = cfg.kind();
  const std::string fmt = cfg.get("format");
  if (fmt != "json" && fmt != "csv" && fmt != "both")
    throw ConfigError("format must be json, csv or both");
  const bool timing = cfg.flag("report.timing");

  Report rep;
  if (k == "localtime") rep = run_localtime(cfg);
  else if (k == "alpha") rep = run_alpha(cfg);
  else if (k == "chaos") rep = run_chaos(cfg);
  else if (k == "moment") rep = run_moment(cfg);
  else if (k == "field") rep = run_field(cfg);
  else if (k == "bounds") rep = run_bounds(cfg);
  else if (k == "crosscheck") rep = run_crosscheck(cfg);
  else throw ConfigError("unknown experiment kind '" + k + "'");

  rep.experiment = k;
  rep.version = kLibraryVersion;
  rep.config = cfg.effective();
  rep.config.erase("out");
  rep.config.erase("format");
  if (timing)
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace fracheat
