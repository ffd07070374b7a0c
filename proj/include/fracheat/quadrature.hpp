#pragma once

#include <cstddef>
#include <functional>

namespace fracheat {

struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t n_eval = 0;
  bool converged = false;
};

struct QuadOptions {
  double abs_tol = 1e-13;
  double rel_tol = 1e-11;
  std::size_t max_intervals = 2000;
};

using Integrand = std::function<double(double)>;

// Globally adaptive Gauss-Kronrod 7/15 on [a,b].
QuadResult integrate(const Integrand& f, double a, double b, const QuadOptions& opt = {});

// f(x, x-a, b-x): the distances are passed exactly so integrands singular at an
// endpoint keep full relative precision there.
using EndpointIntegrand = std::function<double(double, double, double)>;

// Integral of f on [a,b] where f ~ (x-a)^alpha_a near a and ~ (b-x)^alpha_b
// near b (alpha > -1). Each half is mapped with x = end +- L v^{1/(1+alpha)}
// so the transformed integrand is bounded at the singular end.
QuadResult integrate_singular(const EndpointIntegrand& f, double a, double b, double alpha_a,
                              double alpha_b, const QuadOptions& opt = {});
// Convenience overload for integrands that only need x.
QuadResult integrate_singular(const Integrand& f, double a, double b, double alpha_a,
                              double alpha_b, const QuadOptions& opt = {});

}  // namespace fracheat
