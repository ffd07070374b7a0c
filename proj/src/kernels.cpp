#include "fracheat/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "fracheat/errors.hpp"
#include "fracheat/quadrature.hpp"

namespace fracheat {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// |x|^{2H} with 0^{2H} = 0
inline double pw(double x, double e) { return x == 0.0 ? 0.0 : std::pow(std::abs(x), e); }
}  // namespace

HurstParam::HurstParam(double h) : h_(h) {
  if (!(h > 0.0 && h < 1.0)) throw ConfigError("Hurst parameter must lie in (0,1)");
}

Regime HurstParam::regime() const {
  if (h_ < 0.5) return Regime::SubHalf;
  if (h_ == 0.5) return Regime::Half;
  return Regime::SuperHalf;
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::SubHalf: return "sub-half";
    case Regime::Half: return "half";
    case Regime::SuperHalf: return "super-half";
  }
  return "?";
}

double heat_kernel_r2(double t, double r2, int d) {
  if (!(t > 0.0)) throw DomainError("heat kernel needs t > 0");
  return std::pow(2.0 * std::numbers::pi * t, -0.5 * d) * std::exp(-r2 / (2.0 * t));
}

double heat_kernel(double t, std::span<const double> x) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return heat_kernel_r2(t, r2, static_cast<int>(x.size()));
}

double heat_kernel(double t, double x) { return heat_kernel_r2(t, x * x, 1); }

double mollifier(std::span<const double> x, const MollifierEps& m) {
  if (static_cast<int>(x.size()) != m.d) throw DataError("mollifier: dimension mismatch");
  return heat_kernel(m.epsilon, x);
}

double phi_weight(double s, double t, HurstParam H) {
  if (!H.super_half()) throw RegimeError("H > 1/2", "phi weight is defined for H > 1/2 only");
  if (s == t) throw SingularityError("phi(s,t) is singular on the diagonal s = t");
  const double h = H.h();
  return h * (2.0 * h - 1.0) * std::pow(std::abs(t - s), 2.0 * h - 2.0);
}

double phi_rect_mass(double a1, double b1, double a2, double b2, HurstParam H) {
  if (b1 <= a1 || b2 <= a2) return 0.0;
  const double e = 2.0 * H.h();
  return 0.5 * (pw(a1 - b2, e) + pw(b1 - a2, e) - pw(b1 - b2, e) - pw(a1 - a2, e));
}

double phi_norm_1T(HurstParam H, double T) {
  const double h = H.h();
  return 2.0 * h * std::pow(0.5 * T, 2.0 * h - 1.0);
}

double eta_delta(double s1, double s2, double t, double delta, HurstParam H) {
  if (!(delta > 0.0)) throw DomainError("eta_delta needs delta > 0");
  if (s1 < 0.0 || s2 < 0.0 || s1 > t || s2 > t)
    throw DomainError("eta_delta needs 0 <= s1,s2 <= t");
  if (H.sub_half()) throw RegimeError("H >= 1/2", "eta_delta is defined for H >= 1/2");
  const double b1 = t - s1, b2 = t - s2;
  const double a1 = std::max(0.0, b1 - delta), a2 = std::max(0.0, b2 - delta);
  if (H.is_half()) {
    const double ov = std::min(b1, b2) - std::max(a1, a2);
    return ov > 0.0 ? ov / (delta * delta) : 0.0;
  }
  return phi_rect_mass(a1, b1, a2, b2, H) / (delta * delta);
}

double eta_delta_gamma(HurstParam H) {
  const double h = H.h();
  const double c = std::pow(2.0, 2.0 - 2.0 * h);
  return std::max(h * c, h * (2.0 * h - 1.0) * c);
}

namespace {

QuadOptions tight() {
  QuadOptions o;
  o.abs_tol = 1e-15;
  o.rel_tol = 1e-12;
  o.max_intervals = 4000;
  return o;
}

// K_H(s+L, s) without the normalising constant; the inner integral runs over w = u - s.
double k_h_raw(double s, double L, double h) {
  if (h > 0.5) {
    auto f = [&](double w, double, double) { return std::pow(w, h - 1.5) * std::pow(s + w, h - 0.5); };
    const double I = integrate_singular(f, 0.0, L, h - 1.5, 0.0, tight()).value;
    return std::pow(s, 0.5 - h) * I;
  }
  auto f = [&](double w, double, double) { return std::pow(s + w, h - 1.5) * std::pow(w, h - 0.5); };
  const double I = integrate_singular(f, 0.0, L, h - 0.5, 0.0, tight()).value;
  return std::pow((s + L) / s, h - 0.5) * std::pow(L, h - 0.5) -
         (h - 0.5) * std::pow(s, 0.5 - h) * I;
}

}  // namespace

double k_h_constant(HurstParam H) {
  static std::mutex mu;
  static std::map<double, double> cache;
  const double h = H.h();
  if (H.is_half()) return 1.0;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(h);
    if (it != cache.end()) return it->second;
  }
  auto f = [&](double s, double, double rest) {
    const double k = k_h_raw(s, rest, h);
    return k * k;
  };
  QuadOptions o;
  o.rel_tol = 1e-11;
  const double a0 = -std::abs(2.0 * h - 1.0);
  const double a1 = std::min(0.0, 2.0 * h - 1.0);
  const double norm = integrate_singular(f, 0.0, 1.0, a0, a1, o).value;
  const double c = 1.0 / std::sqrt(norm);
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(h, c);
  return c;
}

double k_h_kernel_gap(double s, double gap, HurstParam H) {
  if (!(s > 0.0)) throw DomainError("K_H(t,s) needs s > 0");
  if (gap < 0.0) return 0.0;
  if (H.is_half()) return 1.0;
  if (gap == 0.0) return H.super_half() ? 0.0 : kInf;
  return k_h_constant(H) * k_h_raw(s, gap, H.h());
}

double k_h_kernel(double t, double s, HurstParam H) {
  if (!(s > 0.0)) throw DomainError("K_H(t,s) needs s > 0");
  if (s > t) return 0.0;
  return k_h_kernel_gap(s, t - s, H);
}

double k_h_integral_first(double s, double a, double b, HurstParam H) {
  if (b <= a) return 0.0;
  if (a < s) throw DomainError("k_h_integral_first needs a >= s");
  if (H.is_half()) return b - a;
  const double w0 = a - s, w1 = b - s;
  auto f = [&](double w, double, double) { return w <= 0.0 ? 0.0 : k_h_kernel_gap(s, w, H); };
  const double alpha = (w0 == 0.0) ? H.h() - 0.5 : 0.0;
  QuadOptions o;
  o.rel_tol = 1e-10;
  return integrate_singular(f, w0, w1, alpha, 0.0, o).value;
}

KStarOperator::KStarOperator(const TimeGrid& grid, HurstParam H)
    : grid_(grid), H_(H) {
  const std::size_t N = grid.n_nodes();
  const std::size_t n = grid.n_steps();
  const double T = grid.t_end();
  const double hstep = grid.dt();
  mat_.assign(N * N, 0.0);
  finite_.assign(N, true);
  kT_.resize(N);
  w_.assign(N, 0.0);

  if (H.is_half()) {
    for (std::size_t i = 0; i < N; ++i) {
      mat_[i * N + i] = 1.0;
      kT_[i] = 1.0;
      w_[i] = (i == 0 || i == n) ? 0.5 * hstep : hstep;
    }
    return;
  }
  if (n < 2) throw ConfigError("fractional operator needs at least 2 grid steps");

  const auto r = grid.nodes();
  kT_[0] = kInf;
  for (std::size_t i = 1; i < N; ++i) kT_[i] = k_h_kernel(T, r[i], H);
  finite_[0] = false;
  if (H.sub_half()) finite_[n] = false;

  for (std::size_t i = 1; i < n; ++i) {
    double* row = mat_.data() + i * N;
    row[i] += kT_[i];
    const double c_first = hstep * k_h_kernel(r[i + 1], r[i], H) -
                           k_h_integral_first(r[i], r[i], r[i + 1], H);
    row[i + 1] += c_first / hstep;
    row[i] -= c_first / hstep;
    double k_prev = k_h_kernel(r[i + 1], r[i], H);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double k_next = k_h_kernel(r[j + 1], r[i], H);
      const double dk = k_next - k_prev;
      row[j] += 0.5 * dk;
      row[j + 1] += 0.5 * dk;
      row[i] -= dk;
      k_prev = k_next;
    }
  }
  for (std::size_t j = 0; j < N; ++j) {
    if (!finite_[0]) mat_[j] = kNaN;
    if (!finite_[n]) mat_[n * N + j] = kNaN;
  }

  // product-integration weights; endpoint half-cells merged into neighbours
  const double hH = H.h();
  const double a0 = -std::abs(2.0 * hH - 1.0);
  const double a1 = std::min(0.0, 2.0 * hH - 1.0);
  QuadOptions o;
  o.rel_tol = 1e-10;
  for (std::size_t i = 1; i < n; ++i) {
    double lo = r[i] - 0.5 * hstep, hi = r[i] + 0.5 * hstep;
    double al = 0.0, ah = 0.0;
    if (i == 1) {
      lo = 0.0;
      al = a0;
    }
    if (i == n - 1) {
      hi = T;
      ah = a1;
    }
    const bool at_end = (i == n - 1);
    auto k2 = [&](double x, double, double db) {
      const double gap = at_end ? db : T - x;
      if (x <= 0.0 || gap <= 0.0) return 0.0;
      const double k = k_h_kernel_gap(x, gap, H);
      return k * k;
    };
    const double mass = integrate_singular(k2, lo, hi, al, ah, o).value;
    w_[i] = mass / (kT_[i] * kT_[i]);
  }
}

std::vector<double> KStarOperator::apply(std::span<const double> f) const {
  const std::size_t N = size();
  if (f.size() != N) throw DataError("k_star_apply: function length does not match grid");
  for (double v : f)
    if (std::isnan(v)) throw DataError("k_star_apply: NaN in input");
  std::vector<double> out(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    if (!finite_[i]) {
      out[i] = kNaN;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < N; ++j) s += mat_[i * N + j] * f[j];
    out[i] = s;
  }
  return out;
}

std::vector<double> KStarOperator::tensor_weights() const {
  const std::size_t N = size();
  std::vector<double> W(N * N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    if (w_[i] == 0.0 || !finite_[i]) continue;
    const double* row = mat_.data() + i * N;
    for (std::size_t j = 0; j < N; ++j) {
      const double a = w_[i] * row[j];
      if (a == 0.0) continue;
      double* out = W.data() + j * N;
      for (std::size_t l = 0; l < N; ++l) out[l] += a * row[l];
    }
  }
  return W;
}

std::vector<double> k_star_apply(std::span<const double> f, HurstParam H, double T) {
  if (f.size() < 2) throw DataError("k_star_apply needs at least two grid values");
  return KStarOperator(TimeGrid(T, f.size() - 1), H).apply(f);
}

WeightFn WeightFn::constant(double c, double t_end) {
  if (!(c >= 0.0)) throw ConfigError("constant weight must be >= 0");
  if (!(t_end > 0.0)) throw ConfigError("weight horizon must be > 0");
  WeightFn w;
  w.kind_ = Kind::Constant;
  w.c_ = c;
  w.t_end_ = t_end;
  w.norm_ = c * t_end;
  return w;
}

WeightFn WeightFn::phi(HurstParam H, double t_end) {
  if (!H.super_half()) throw RegimeError("H > 1/2", "phi weight requires H > 1/2");
  if (!(t_end > 0.0)) throw ConfigError("weight horizon must be > 0");
  WeightFn w;
  w.kind_ = Kind::Phi;
  w.h_ = H.h();
  w.t_end_ = t_end;
  w.norm_ = phi_norm_1T(H, t_end);
  return w;
}

WeightFn WeightFn::eta_delta(HurstParam H, double delta, double t_end) {
  if (H.sub_half()) throw RegimeError("H >= 1/2", "eta_delta weight requires H >= 1/2");
  if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
  if (!(t_end > 0.0)) throw ConfigError("weight horizon must be > 0");
  WeightFn w;
  w.kind_ = Kind::EtaDelta;
  w.h_ = H.h();
  w.delta_ = delta;
  w.t_end_ = t_end;
  // int_0^t eta_delta(s1,s2) ds1 <= 1 (H=1/2) and <= ||phi||_{1,t} (H>1/2)
  w.norm_ = H.is_half() ? 1.0 : phi_norm_1T(H, t_end);
  return w;
}

WeightFn WeightFn::table(TimeGrid grid, std::vector<double> values) {
  const std::size_t N = grid.n_nodes();
  if (values.size() != N * N) throw DataError("weight table must be (n+1)x(n+1)");
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      const double v = values[i * N + j];
      if (!(v >= 0.0)) throw DataError("weight table entries must be finite and >= 0");
      if (v != values[j * N + i]) throw DataError("weight table must be symmetric");
    }
  WeightFn w;
  w.kind_ = Kind::Table;
  w.t_end_ = grid.t_end();
  double best = 0.0;
  const double h = grid.dt();
  for (std::size_t i = 0; i < N; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < N; ++j)
      s += values[i * N + j] * ((j == 0 || j == N - 1) ? 0.5 * h : h);
    best = std::max(best, s);
  }
  w.norm_ = best;
  w.grid_ = grid;
  w.table_ = std::move(values);
  return w;
}

double WeightFn::operator()(double s, double t) const {
  switch (kind_) {
    case Kind::Constant: return c_;
    case Kind::Phi: return phi_weight(s, t, HurstParam(h_));
    case Kind::EtaDelta: return fracheat::eta_delta(s, t, t_end_, delta_, HurstParam(h_));
    case Kind::Table: {
      const TimeGrid& g = *grid_;
      const std::size_t N = g.n_nodes();
      auto locate = [&](double x, std::size_t& j, double& f) {
        const double u = std::clamp(x / g.dt(), 0.0, static_cast<double>(g.n_steps()));
        j = std::min<std::size_t>(static_cast<std::size_t>(u), g.n_steps() - 1);
        f = u - static_cast<double>(j);
      };
      std::size_t i, j;
      double fi, fj;
      locate(s, i, fi);
      locate(t, j, fj);
      auto v = [&](std::size_t a, std::size_t b) { return table_[a * N + b]; };
      return (1 - fi) * (1 - fj) * v(i, j) + fi * (1 - fj) * v(i + 1, j) +
             (1 - fi) * fj * v(i, j + 1) + fi * fj * v(i + 1, j + 1);
    }
  }
  return 0.0;
}

std::optional<double> WeightFn::gamma_T() const {
  switch (kind_) {
    case Kind::Phi: return h_ * (2.0 * h_ - 1.0);
    case Kind::EtaDelta:
      if (h_ > 0.5) return eta_delta_gamma(HurstParam(h_));
      return std::nullopt;
    default: return std::nullopt;
  }
}

std::string WeightFn::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::Constant: os << "const:" << c_; break;
    case Kind::Phi: os << "phi"; break;
    case Kind::EtaDelta: os << "eta:" << delta_; break;
    case Kind::Table: os << "table"; break;
  }
  return os.str();
}

}  // namespace fracheat
