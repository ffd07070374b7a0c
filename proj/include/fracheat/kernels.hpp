#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracheat/paths.hpp"

namespace fracheat {

enum class Regime { SubHalf, Half, SuperHalf };

class HurstParam {
 public:
  explicit HurstParam(double h);

  double h() const { return h_; }
  Regime regime() const;
  bool is_half() const { return h_ == 0.5; }
  bool sub_half() const { return h_ < 0.5; }
  bool super_half() const { return h_ > 0.5; }
  bool d_below_4h(int d) const { return d < 4.0 * h_; }
  bool above_three_quarters() const { return h_ > 0.75; }
  bool above_three_eighths() const { return h_ > 0.375; }

 private:
  double h_;
};

std::string regime_name(Regime r);

struct MollifierEps {
  double epsilon;
  int d;
};

double heat_kernel(double t, std::span<const double> x);
double heat_kernel(double t, double x);
// p_t at a point with squared norm r2 in dimension d.
double heat_kernel_r2(double t, double r2, int d);
double mollifier(std::span<const double> x, const MollifierEps& m);

double phi_weight(double s, double t, HurstParam H);
// Integral of phi over [a1,b1]x[a2,b2] by the corner antiderivative.
double phi_rect_mass(double a1, double b1, double a2, double b2, HurstParam H);
// sup_s int_0^T phi(s,t) dt, attained at s = T/2.
double phi_norm_1T(HurstParam H, double T);

double eta_delta(double s1, double s2, double t, double delta, HurstParam H);
// Constant gamma with eta_delta(s1,s2) <= gamma |s1-s2|^{2H-2} for H > 1/2.
double eta_delta_gamma(HurstParam H);

// Normalising constant of K_H (variance calibration), cached per H.
double k_h_constant(HurstParam H);
double k_h_kernel(double t, double s, HurstParam H);
// K_H(s+gap, s); accurate when gap is small relative to s.
double k_h_kernel_gap(double s, double gap, HurstParam H);
// int_a^b K_H(u,s) du over the first argument, s <= a < b.
double k_h_integral_first(double s, double a, double b, HurstParam H);

// Discretised adjoint operator on a uniform grid over [0,T]. Rows whose
// continuum value is infinite (r=0 for H != 1/2, r=T for H < 1/2) are NaN.
class KStarOperator {
 public:
  KStarOperator(const TimeGrid& grid, HurstParam H);

  const TimeGrid& grid() const { return grid_; }
  HurstParam hurst() const { return H_; }
  std::size_t size() const { return grid_.n_nodes(); }
  double m(std::size_t i, std::size_t j) const { return mat_[i * size() + j]; }
  bool row_finite(std::size_t i) const { return finite_[i]; }
  const std::vector<double>& k_at_end() const { return kT_; }
  // Product-integration weights for int_0^T g(r) dr where g ~ K(T,r)^2 x smooth.
  const std::vector<double>& diag_weights() const { return w_; }

  std::vector<double> apply(std::span<const double> f) const;
  // W = M^T diag(w) M, so that int (K*xK*)f(r,r)dr = sum_jl W_jl f_jl.
  std::vector<double> tensor_weights() const;

 private:
  TimeGrid grid_;
  HurstParam H_;
  std::vector<double> mat_;
  std::vector<bool> finite_;
  std::vector<double> kT_;
  std::vector<double> w_;
};

std::vector<double> k_star_apply(std::span<const double> f, HurstParam H, double T);

class WeightFn {
 public:
  enum class Kind { Constant, Phi, EtaDelta, Table };

  static WeightFn constant(double c, double t_end);
  static WeightFn phi(HurstParam H, double t_end);
  static WeightFn eta_delta(HurstParam H, double delta, double t_end);
  // values: row-major (n+1)x(n+1) node table, bilinear in between.
  static WeightFn table(TimeGrid grid, std::vector<double> values);

  Kind kind() const { return kind_; }
  double t_end() const { return t_end_; }
  double c() const { return c_; }
  double hurst() const { return h_; }
  double delta() const { return delta_; }
  const std::optional<TimeGrid>& table_grid() const { return grid_; }
  const std::vector<double>& table_values() const { return table_; }

  double operator()(double s, double t) const;
  double norm_1T() const { return norm_; }
  std::optional<double> gamma_T() const;
  bool bounded() const { return kind_ != Kind::Phi; }
  std::string describe() const;

 private:
  Kind kind_ = Kind::Constant;
  double t_end_ = 1.0;
  double c_ = 1.0;
  double h_ = 0.5;
  double delta_ = 0.0;
  double norm_ = 0.0;
  std::optional<TimeGrid> grid_;
  std::vector<double> table_;
};

}  // namespace fracheat
