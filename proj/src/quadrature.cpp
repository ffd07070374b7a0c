#include "fracheat/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace fracheat {

namespace {

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const Integrand& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double rk = fc * kWgk[7];
  double rg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double f1 = f(c - dx);
    const double f2 = f(c + dx);
    rk += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) rg += kWg[j / 2] * (f1 + f2);
  }
  const double value = rk * h;
  double err = std::abs((rk - rg) * h);
  return {a, b, value, err};
}

}  // namespace

QuadResult integrate(const Integrand& f, double a, double b, const QuadOptions& opt) {
  QuadResult r;
  if (a == b) {
    r.converged = true;
    return r;
  }
  std::priority_queue<Segment> heap;
  Segment s0 = gk15(f, a, b);
  heap.push(s0);
  double total = s0.value;
  double err = s0.error;
  r.n_eval = 15;
  std::size_t n = 1;
  while (err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total)) && n < opt.max_intervals) {
    Segment worst = heap.top();
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    if (!(m > worst.a && m < worst.b)) {
      heap.push(worst);
      break;
    }
    Segment l = gk15(f, worst.a, m);
    Segment rr = gk15(f, m, worst.b);
    r.n_eval += 30;
    total += l.value + rr.value - worst.value;
    err += l.error + rr.error - worst.error;
    heap.push(l);
    heap.push(rr);
    ++n;
  }
  // re-sum to shed accumulated cancellation in the running totals
  total = 0.0;
  err = 0.0;
  std::vector<Segment> all;
  all.reserve(heap.size());
  while (!heap.empty()) {
    all.push_back(heap.top());
    heap.pop();
  }
  std::sort(all.begin(), all.end(), [](const Segment& x, const Segment& y) { return x.a < y.a; });
  for (const auto& s : all) {
    total += s.value;
    err += s.error;
  }
  r.value = total;
  r.abs_error = err;
  r.converged = err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
  return r;
}

QuadResult integrate_singular(const EndpointIntegrand& f, double a, double b, double alpha_a,
                              double alpha_b, const QuadOptions& opt) {
  const double m = 0.5 * (a + b);
  const double len = m - a;
  // left half: x = a + len*v^p; right half: x = b - len*v^p
  auto half = [&](bool left, double alpha) {
    const double p = alpha < 0.0 ? 1.0 / (1.0 + alpha) : 1.0;
    Integrand g = [&, p, left](double v) {
      if (v <= 0.0) return 0.0;
      const double vp = p == 1.0 ? v : std::pow(v, p);
      const double off = len * vp;
      const double x = left ? a + off : b - off;
      const double da = left ? off : (b - a) - off;
      const double db = left ? (b - a) - off : off;
      return f(x, da, db) * len * p * vp / v;
    };
    return integrate(g, 0.0, 1.0, opt);
  };
  QuadResult left = half(true, alpha_a);
  QuadResult right = half(false, alpha_b);
  QuadResult r;
  r.value = left.value + right.value;
  r.abs_error = left.abs_error + right.abs_error;
  r.n_eval = left.n_eval + right.n_eval;
  r.converged = left.converged && right.converged;
  return r;
}

QuadResult integrate_singular(const Integrand& f, double a, double b, double alpha_a,
                              double alpha_b, const QuadOptions& opt) {
  return integrate_singular([&](double x, double, double) { return f(x); }, a, b, alpha_a,
                            alpha_b, opt);
}

}  // namespace fracheat
