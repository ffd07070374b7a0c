#include "fracheat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "fracheat/errors.hpp"

namespace fracheat {

void KahanSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x))
    comp_ += (sum_ - t) + x;
  else
    comp_ += (x - t) + sum_;
  sum_ = t;
}

SampleSummary summarize(std::span<const double> x) {
  if (x.size() < 2) throw ConfigError("at least 2 samples are needed for a standard error");
  KahanSum s;
  for (double v : x) s.add(v);
  const double n = static_cast<double>(x.size());
  const double mean = s.value() / n;
  KahanSum q;
  for (double v : x) q.add((v - mean) * (v - mean));
  SampleSummary r;
  r.mean = mean;
  r.variance = q.value() / (n - 1.0);
  r.std_error = std::sqrt(r.variance / n);
  r.n = x.size();
  return r;
}

double paired_z(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("paired_z: length mismatch");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - y[i];
  const auto s = summarize(d);
  if (s.std_error == 0.0) return s.mean == 0.0 ? 0.0 : INFINITY;
  return s.mean / s.std_error;
}

double combined_z(double a, double se_a, double b, double se_b) {
  const double se = std::sqrt(se_a * se_a + se_b * se_b);
  if (se == 0.0) return a == b ? 0.0 : INFINITY;
  return (a - b) / se;
}

std::vector<double> richardson_weights(std::span<const double> eps,
                                       std::span<const double> exponents) {
  const std::size_t m = eps.size();
  if (m == 0 || exponents.size() + 1 != m)
    throw ConfigError("Richardson: need one exponent fewer than rungs");
  // Solve A^T c = e1 where A[i] = (1, eps_i^p1, ...): sum c = 1, sum c eps^p = 0.
  std::vector<double> a(m * m), rhs(m, 0.0);
  rhs[0] = 1.0;
  for (std::size_t row = 0; row < m; ++row)
    for (std::size_t col = 0; col < m; ++col)
      a[row * m + col] = row == 0 ? 1.0 : std::pow(eps[col], exponents[row - 1]);
  for (std::size_t p = 0; p < m; ++p) {
    std::size_t piv = p;
    for (std::size_t r = p + 1; r < m; ++r)
      if (std::abs(a[r * m + p]) > std::abs(a[piv * m + p])) piv = r;
    if (a[piv * m + p] == 0.0) throw ConfigError("Richardson: degenerate rungs");
    for (std::size_t c = 0; c < m; ++c) std::swap(a[p * m + c], a[piv * m + c]);
    std::swap(rhs[p], rhs[piv]);
    for (std::size_t r = p + 1; r < m; ++r) {
      const double f = a[r * m + p] / a[p * m + p];
      for (std::size_t c = p; c < m; ++c) a[r * m + c] -= f * a[p * m + c];
      rhs[r] -= f * rhs[p];
    }
  }
  std::vector<double> c(m);
  for (std::size_t p = m; p-- > 0;) {
    double s = rhs[p];
    for (std::size_t q = p + 1; q < m; ++q) s -= a[p * m + q] * c[q];
    c[p] = s / a[p * m + p];
  }
  return c;
}

std::vector<double> richardson_exponents(double hurst, int d, std::size_t n_rungs) {
  // leading corner term eps^{2H-d/2}, the smooth eps^1 term and the next
  // half-integer correction; near-coincident exponents are merged
  std::vector<double> cand = {2.0 * hurst - 0.5 * d, 1.0, 2.0 * hurst - 0.5 * d + 0.5, 1.5, 2.0};
  std::sort(cand.begin(), cand.end());
  std::vector<double> out;
  for (double p : cand) {
    if (p <= 0.0) continue;
    if (!out.empty() && p - out.back() < 0.25) continue;
    out.push_back(p);
  }
  if (n_rungs == 0) return {};
  out.resize(std::min(out.size(), n_rungs - 1));
  return out;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const unsigned nt = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::thread> pool;
  std::exception_ptr first;
  std::mutex mu;
  for (unsigned w = 0; w < nt; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += nt) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

LadderEstimate estimate_ladder(std::size_t n_samples, std::span<const double> eps,
                               std::span<const double> exponents,
                               const std::function<double(std::size_t, std::size_t)>& value,
                               std::uint64_t seed, std::optional<double> delta) {
  const std::size_t R = eps.size();
  LadderEstimate out;
  std::vector<double> x(n_samples);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < n_samples; ++i) x[i] = value(i, r);
    const auto s = summarize(x);
    out.rungs.push_back({s.mean, s.std_error, n_samples, eps[r], delta, seed});
  }
  std::vector<double> sorted(eps.begin(), eps.end());
  std::sort(sorted.begin(), sorted.end());
  const bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
  if (R >= 2 && distinct && exponents.size() + 1 == R) {
    out.exponents.assign(exponents.begin(), exponents.end());
    const auto c = richardson_weights(eps, exponents);
    for (std::size_t i = 0; i < n_samples; ++i) {
      double v = 0.0;
      for (std::size_t r = 0; r < R; ++r) v += c[r] * value(i, r);
      x[i] = v;
    }
    const auto s = summarize(x);
    out.extrapolated = MomentEstimate{s.mean, s.std_error, n_samples, 0.0, delta, seed};
  }
  return out;
}

}  // namespace fracheat
