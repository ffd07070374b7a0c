#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracheat/initial.hpp"
#include "fracheat/kernels.hpp"
#include "fracheat/qmc.hpp"

namespace fracheat {

struct GramMatrix {
  std::size_t k = 0;
  std::vector<double> entries;  // row-major, s_j^s_l + t_j^t_l (+ eps on the diagonal)

  static GramMatrix from_times(std::span<const double> s, std::span<const double> t,
                               double eps = 0.0);
  double operator()(std::size_t i, std::size_t j) const { return entries[i * k + j]; }
  // log det by Cholesky; empty if not numerically positive definite
  std::optional<double> log_det() const;
};

double psi(std::span<const double> s, std::span<const double> t, int d);
double psi_eps(std::span<const double> s, std::span<const double> t, int d, double eps);
// log psi_eps; empty when the Gram matrix is singular
std::optional<double> log_psi_eps(std::span<const double> s, std::span<const double> t, int d,
                                  double eps);

struct AlphaConfig {
  QmcConfig qmc;
  std::vector<double> eps = {0.0};  // psi_eps rungs, 0 = limit density
  // Dirichlet gap exponent of the importance density; 0 picks the default
  double gap_exponent = 0.0;
};

struct AlphaEstimate {
  std::size_t k = 0;
  double value = 0.0;
  double std_error = 0.0;
  double T = 0.0;
  int d = 1;
  double epsilon = 0.0;
  std::string weight;
  std::size_t n_points = 0;
  std::size_t n_replicates = 0;
  std::size_t n_failures = 0;
};

struct AlphaLadder {
  std::size_t k = 0;
  double T = 0.0;
  int d = 1;
  std::string weight;
  std::vector<double> eps;
  QmcResult qmc;

  AlphaEstimate at(std::size_t j) const;
};

// alpha_k = int_{[0,T]^{2k}} prod eta(s_i,t_i) psi_eps(s,t) ds dt for every eps rung.
AlphaLadder alpha_k_ladder(const WeightFn& w, double T, int d, std::size_t k,
                           const AlphaConfig& cfg);
AlphaEstimate alpha_k(const WeightFn& w, double T, int d, std::size_t k, const QmcConfig& qmc);

// H = 1/2 collapse (d=1): int_{[0,T]^k} psi_eps(s,s) ds, the k-th moment of
// int_0^T p_eps(B1_s - B2_s) ds.
AlphaLadder alpha_k_diagonal(double T, std::size_t k, const AlphaConfig& cfg);

// k! 2^{-k} T^{k/2} ||eta||^k / Gamma((k+1)/2)
double alpha_growth_bound(std::size_t k, double T, double eta_norm);

// Exact value of int_{[0,T]^k} psi(s,s) ds = k! 2^{-k} T^{k/2} / Gamma(k/2+1).
double alpha_diagonal_exact(std::size_t k, double T);

enum class NormMethod { Auto, ClosedForm, QuasiMC };

struct ChaosConfig {
  QmcConfig qmc;
  NormMethod method = NormMethod::Auto;
  std::optional<double> beta_H;
};

struct ChaosTerm {
  double value = 0.0;  // (n!)^2 ||f_n||^2
  double std_error = 0.0;
  bool exact = false;
  bool upper_bound = false;
};

ChaosTerm fn_norm_sq(std::size_t n, HurstParam H, int d, double t, const U0& u0,
                     std::span<const double> x, const ChaosConfig& cfg);

struct ChaosSeries {
  std::vector<double> terms;  // n! ||f_n||^2, n = 0..N
  std::vector<double> term_errors;
  std::size_t truncation = 0;
  double tail_ratio = 0.0;
  double tail_estimate = 0.0;
  bool divergence_suspected = false;
  double sum = 0.0;  // NaN when divergence is suspected
  double sum_error = 0.0;
  bool upper_bound = false;
  double hurst = 0.5;
  int d = 1;
  double t = 0.0;
  std::string u0;
  std::optional<double> T0;
};

ChaosSeries second_moment_series(HurstParam H, int d, double t, const U0& u0, std::size_t N,
                                 const ChaosConfig& cfg, std::span<const double> x = {});

// (beta_H Gamma(1-d/4H)^{2H})^{-1/(2H-1)}
double critical_time_T0(HurstParam H, int d, double beta_H);

}  // namespace fracheat
