#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracheat/kernels.hpp"
#include "fracheat/paths.hpp"
#include "fracheat/stats.hpp"

namespace fracheat {

// Quadrature weights W_jl for sum_jl W_jl g(s_j, s_l) ~ int int eta(s,t) g(s,t).
struct WeightMatrix {
  std::size_t n_nodes = 0;
  std::vector<double> w;  // row-major n_nodes x n_nodes
  bool symmetric = true;
  bool diagonal = false;  // only W_jj nonzero

  double operator()(std::size_t j, std::size_t l) const { return w[j * n_nodes + l]; }
};

// Constant/EtaDelta/Table: product trapezoid times node values. Phi: exact
// phi-mass of each pair of dual cells (corner formula).
WeightMatrix weight_matrix(const WeightFn& w, const TimeGrid& grid);
// Trapezoid weights of a single time integral over the grid.
std::vector<double> trapezoid_weights(const TimeGrid& grid);

struct LocalTimeSample {
  double value = 0.0;
  double epsilon = 0.0;
  std::string weight;
  bool self = false;
  std::size_t i = 0, j = 1;
};

// sum_jl W_jl p_eps(a_j - b_l) for each eps in the ladder.
void pair_sums(const WeightMatrix& W, const PathView& a, const PathView& b,
               std::span<const double> eps, std::span<double> out);
// sum_jl W_jl p_eps(a_j - a_l), W symmetric.
void self_sums(const WeightMatrix& W, const PathView& a, std::span<const double> eps,
               std::span<double> out);
// sum_j w_j p_eps(a_j - b_j).
void diagonal_sums(std::span<const double> w, const PathView& a, const PathView& b,
                   std::span<const double> eps, std::span<double> out);

LocalTimeSample intersection_lt(const PathView& b1, const PathView& b2, const TimeGrid& grid,
                                const WeightFn& w, const MollifierEps& m);
LocalTimeSample self_intersection_lt(const PathView& b, const TimeGrid& grid, const WeightFn& w,
                                     const MollifierEps& m, bool normalized);
LocalTimeSample frac_deriv_lt(const PathView& b1, const PathView& b2, const TimeGrid& grid,
                              HurstParam H, const MollifierEps& m, double T);

// int int eta(s,t) p_{s+t+eps}(0) and int int eta(s,t) p_{|t-s|+eps}(0), by quadrature.
double intersection_lt_mean(const WeightFn& w, double eps, double T, int d);
double self_lt_mean(const WeightFn& w, double eps, double T);

enum class LtVariant { Intersection, Self, SelfNormalized, FracDeriv, Diagonal };

std::string variant_name(LtVariant v);

struct LtConfig {
  LtVariant variant = LtVariant::Intersection;
  WeightFn weight = WeightFn::constant(1.0, 1.0);
  double hurst = 0.5;  // FracDeriv only
  int d = 1;
  double T = 1.0;
  std::vector<double> eps = {0.01};
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  unsigned threads = 1;
  double mesh_factor = 4.0;         // dt <= min(eps)/mesh_factor
  std::size_t base_steps = 16;      // coarse grid before bridge refinement
  std::optional<std::size_t> n_steps;  // override of the fine grid size
};

// Fine grid used by the estimators for a configuration.
TimeGrid lt_grid(const LtConfig& cfg);

// Per-sample local times on all eps rungs (n_samples x rungs, row-major).
struct LtSamples {
  std::vector<double> eps;
  std::size_t n_samples = 0;
  std::vector<double> values;
  TimeGrid grid{1.0, 1};

  double at(std::size_t i, std::size_t r) const { return values[i * eps.size() + r]; }
  std::vector<double> rung(std::size_t r) const;
};

LtSamples sample_local_times(const LtConfig& cfg);

using LtMoments = LadderEstimate;

// E[(local time)^k] per rung plus per-sample Richardson extrapolation.
LtMoments lt_moment(const LtConfig& cfg, std::size_t k);
// E[exp(lambda * local time)] per rung.
LtMoments lt_exp_moment(const LtConfig& cfg, double lambda);

// Moments of f(sample) computed from existing samples.
LtMoments ladder_moments(const LtSamples& s, const LtConfig& cfg,
                         const std::function<double(double)>& f);

}  // namespace fracheat
