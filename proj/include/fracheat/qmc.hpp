#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fracheat {

struct QmcConfig {
  std::size_t n_points = 1u << 14;
  std::size_t n_replicates = 16;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  unsigned threads = 1;
};

// Replicate-level output of a vector-valued randomized QMC integration.
struct QmcResult {
  std::size_t n_outputs = 0;
  std::size_t n_replicates = 0;
  std::vector<double> replicate_means;  // n_replicates x n_outputs
  std::size_t n_failures = 0;            // points where the integrand reported failure

  double replicate(std::size_t r, std::size_t j) const {
    return replicate_means[r * n_outputs + j];
  }
  double mean(std::size_t j) const;
  double std_error(std::size_t j) const;
  // Mean and standard error of sum_j c_j * output_j across replicates.
  std::pair<double, double> combine(std::span<const double> c) const;
};

// f(u, out) fills out (size n_outputs) and returns false if the point is
// degenerate (counted, contributes 0). u lies in the open unit cube.
using QmcIntegrand = std::function<bool(std::span<const double>, std::span<double>)>;

// Sobol points with an independent random digital shift per replicate.
QmcResult qmc_integrate(std::size_t dim, std::size_t n_outputs, const QmcConfig& cfg,
                        const QmcIntegrand& f);

}  // namespace fracheat
