#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fracheat/chaos.hpp"
#include "fracheat/initial.hpp"
#include "fracheat/kernels.hpp"
#include "fracheat/paths.hpp"
#include "fracheat/stats.hpp"

namespace fracheat {

enum class ProductRule { Wick, Stratonovich };

std::string rule_name(ProductRule r);

struct FkConfig {
  std::size_t k = 2;
  double hurst = 0.5;
  int d = 1;
  double t = 0.25;
  std::vector<double> x;  // empty = origin
  U0 u0 = U0::constant(1.0);
  std::vector<double> eps = {4e-3, 2e-3, 1e-3};
  std::optional<double> delta;  // none: phi (H>1/2) or the single-time rule (H=1/2)
  std::size_t n_samples = 10000;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  unsigned threads = 1;
  ProductRule rule = ProductRule::Wick;
  bool strat_half_factor = true;
  // d = 2 Wick regime check
  std::optional<double> beta_H;
  std::optional<double> gamma_T;  // default: H 2^{2-2H}
  double mesh_factor = 4.0;
  std::size_t base_steps = 16;
  std::optional<std::size_t> n_steps;
};

// Regime checks of a configuration; throws RegimeError / ConfigError.
void validate_fk(const FkConfig& cfg);

// Path functionals per sample and eps rung: the initial-condition product and
// the pair / self interaction sums.
struct FkSamples {
  std::vector<double> eps;
  std::size_t n_samples = 0;
  std::size_t k = 0;
  std::vector<double> prefactor;  // prod_j u0(x + B_t^j)
  std::vector<double> pair;       // n x R, sum_{i<j} of pairwise local times
  std::vector<double> self;       // n x R, sum_j of self-intersection local times
  std::vector<double> gaussian;   // n x R, exp(1'Z) with Z ~ N(0,S) (factorisation route)
  TimeGrid grid{1.0, 1};
  std::string route;

  double pair_at(std::size_t i, std::size_t r) const { return pair[i * eps.size() + r]; }
  double self_at(std::size_t i, std::size_t r) const { return self[i * eps.size() + r]; }
};

struct FkSampleOptions {
  bool with_self = false;
  bool with_gaussian = false;
};

FkSamples sample_fk(const FkConfig& cfg, FkSampleOptions opt = {});
TimeGrid fk_grid(const FkConfig& cfg);

struct FkResult {
  LadderEstimate estimate;
  std::string route;
  std::optional<double> t0;  // d = 2 critical time
};

// Sample-wise integrands on rung r.
double wick_value(const FkSamples& s, std::size_t i, std::size_t r);
double stratonovich_value(const FkSamples& s, std::size_t i, std::size_t r, bool half_factor);

FkResult moment_wick(const FkConfig& cfg);
FkResult moment_stratonovich(const FkConfig& cfg);
FkResult moment_fk(const FkConfig& cfg);  // dispatch on cfg.rule
FkResult fk_from_samples(const FkSamples& s, const FkConfig& cfg, ProductRule rule);

// Noise-route check of the Stratonovich exponent: E exp(1'Z), Z ~ N(0,S), against
// the FK integrand with factor 1/2 and factor 1, paired over the same paths.
struct FactorizationCheck {
  double noise_mean = 0.0, noise_se = 0.0;
  double half_mean = 0.0, half_se = 0.0;
  double full_mean = 0.0, full_se = 0.0;
  double z_half = 0.0, z_full = 0.0;
  double epsilon = 0.0;
  std::size_t n_samples = 0;
};

FactorizationCheck stratonovich_factorization(const FkConfig& cfg);

// sum_k alpha_k / k! times u0^2 with mollified alpha_k extrapolated in eps.
struct AlphaSeries {
  std::vector<double> terms;  // extrapolated alpha_k / k!
  std::vector<double> term_errors;
  double sum = 0.0;
  double sum_error = 0.0;
  std::vector<double> eps;
  std::vector<double> exponents;
};

AlphaSeries alpha_series_second_moment(HurstParam H, double t, double u0_const, std::size_t N,
                                       const AlphaConfig& cfg);

// 1 + Phi((sqrt(T)/2) ||eta|| lambda), Phi(x) = sum_{k>=1} x^k / Gamma((k+1)/2).
double exp_moment_bound(double lambda, double T, double eta_norm);
double phi_series(double x);

// H(2H-1) 4 pi / (gamma beta) T^{d/2-2H} Gamma(1-d/4H)^{-2H}
double lambda0(double T, HurstParam H, int d, double gamma_T, double beta_H);
// t0(k) with k(k-1)/2 = lambda0(t0); +inf for k = 1.
double t0_of_k(std::size_t k, HurstParam H, int d, double gamma_T, double beta_H);

struct NegativeMomentBound {
  double kappa = 0.0;        // (E|u0(x+B_t)|)^{-p-1}
  MomentEstimate bound;      // kappa E[|u0(x+B_t)| exp(p^2/2 self-LT)]
};

// eps is the field mollifier; the self-intersection term uses p_{2 eps}.
NegativeMomentBound negative_moment_bound(double p, double t, std::span<const double> x,
                                          const U0& u0, HurstParam H, std::size_t n_samples,
                                          double eps, std::uint64_t seed,
                                          std::uint64_t stream = 0, unsigned threads = 1);

struct FieldWindow {
  double t_max = 0.25;
  std::size_t n_t = 4;
  double x_lo = 0.0, x_hi = 0.0;
  std::size_t n_x = 0;

  double t(std::size_t i) const;
  double x(std::size_t j) const;
};

struct FieldConfig {
  FieldWindow window;
  double hurst = 0.5;
  U0 u0 = U0::constant(1.0);
  double eps = 1e-3;
  double delta = 0.02;
  std::size_t inner_B = 64;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  ProductRule rule = ProductRule::Wick;
  std::size_t time_cells = 0;        // 0: 8 per window step
  double dy = 0.0;                   // 0: sqrt(eps)/2
  std::size_t path_steps_per_cell = 2;
};

struct FieldSample {
  FieldWindow window;
  std::vector<double> values;       // (n_t+1) x (n_x+1), inner average
  std::vector<double> pair_moment;  // unbiased E_B-pair estimate of u^2 per node
  std::uint64_t realization = 0;
  std::size_t inner_B = 0;

  double at(std::size_t i, std::size_t j) const { return values[i * (window.n_x + 1) + j]; }
  double pair_at(std::size_t i, std::size_t j) const {
    return pair_moment[i * (window.n_x + 1) + j];
  }
};

FieldSample sample_solution_field(const FieldConfig& cfg, std::uint64_t realization);

}  // namespace fracheat
