#pragma once

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace topickg::testing {

// KL(Weibull(k, lam) || Gamma(alpha, rate)) by numerical integration in the
// variable u = (x / lam)^k, where q(x) dx = exp(-u) du, over (0, 80):
// tanh-sinh on (0, 1] for the log singularity at u = 0, adaptive
// Gauss-Kronrod on [1, 80]. `tail` receives the q-mass beyond the cutoff.
inline double kl_quadrature(double k, double lam, double alpha, double rate, double* tail = nullptr) {
  const double u_max = 80.0;
  auto integrand = [&](double u) {
    if (u <= 0) return 0.0;
    const double log_u_k = std::log(u) / k;  // log(x / lam)
    const double x = lam * std::exp(log_u_k);
    const double log_q = std::log(k / lam) + (k - 1) * log_u_k - u;
    const double log_p = alpha * std::log(rate) - std::lgamma(alpha) + (alpha - 1) * (std::log(lam) + log_u_k) - rate * x;
    return std::exp(-u) * (log_q - log_p);
  };
  if (tail) *tail = std::exp(-u_max);
  boost::math::quadrature::tanh_sinh<double> ts;
  const double head = ts.integrate(integrand, 0.0, 1.0);
  double err = 0;
  return head + boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 1.0, u_max, 15, 1e-12, &err);
}

}  // namespace topickg::testing
