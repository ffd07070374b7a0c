#pragma once

#include <span>
#include <string>
#include <vector>

namespace fracheat {

// Initial condition u0: constant, Gaussian bump, or tabulated (d=1, linear,
// zero outside the table).
class U0 {
 public:
  enum class Kind { Constant, Bump, Table };

  static U0 constant(double K);
  static U0 bump(double amplitude, std::vector<double> center, double width);
  static U0 table(double x0, double dx, std::vector<double> values);
  // "const:K", "bump:A:c1,c2,...:w", "table:x0:dx:v0,v1,..."
  static U0 parse(const std::string& text);

  Kind kind() const { return kind_; }
  bool is_constant() const { return kind_ == Kind::Constant; }
  double operator()(std::span<const double> x) const;
  double sup_norm() const;
  // p_t u0 (x) and E|u0(x + B_t)|
  double heat(double t, std::span<const double> x) const;
  double heat_abs(double t, std::span<const double> x) const;
  std::string describe() const;

 private:
  double heat_impl(double t, std::span<const double> x, bool absolute) const;

  Kind kind_ = Kind::Constant;
  double a_ = 1.0;
  std::vector<double> center_;
  double w_ = 1.0;
  double x0_ = 0.0, dx_ = 1.0;
  std::vector<double> table_;
};

}  // namespace fracheat
