#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace fracheat {

// Neumaier compensated sum.
class KahanSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct MomentEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  double epsilon = 0.0;
  std::optional<double> delta;
  std::uint64_t seed = 0;
};

struct SampleSummary {
  double mean = 0.0;
  double std_error = 0.0;
  double variance = 0.0;
  std::size_t n = 0;
};

// Mean and standard error (sample sd / sqrt(n)); n < 2 is a configuration error.
SampleSummary summarize(std::span<const double> x);

// Paired z-score of mean(x - y).
double paired_z(std::span<const double> x, std::span<const double> y);

// z-score of two independent estimates.
double combined_z(double a, double se_a, double b, double se_b);

// Weights c_m with sum_m c_m v(eps_m) cancelling eps^p for each p in exponents.
// Requires exponents.size() == eps.size() - 1.
std::vector<double> richardson_weights(std::span<const double> eps,
                                       std::span<const double> exponents);

// Default expansion exponents for mollified local-time functionals in dimension d.
std::vector<double> richardson_exponents(double hurst, int d, std::size_t n_rungs);

// Per-rung estimates of E f on an eps ladder plus the per-sample Richardson
// combination (when the rungs are distinct and exponents fit).
struct LadderEstimate {
  std::vector<MomentEstimate> rungs;
  std::optional<MomentEstimate> extrapolated;
  std::vector<double> exponents;
};

// value(i, r): sample i on rung r.
LadderEstimate estimate_ladder(std::size_t n_samples, std::span<const double> eps,
                               std::span<const double> exponents,
                               const std::function<double(std::size_t, std::size_t)>& value,
                               std::uint64_t seed, std::optional<double> delta = std::nullopt);

// fn(i) for i in [0,n) on `threads` workers; static partition, no shared state.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace fracheat
