#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "topickg/tensor.hpp"

namespace topickg {

inline constexpr double kEulerGamma = 0.57721566490153286061;

/// Bounds applied to uniform draws before the Weibull inverse CDF.
inline constexpr double kUniformLow = 1e-12;
inline constexpr double kUniformHigh = 1.0 - 1e-7;

/// Seeded 64-bit Mersenne Twister. Draws are reproducible for a given seed
/// on a given standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [kUniformLow, kUniformHigh].
  double uniform();
  double normal(double mean, double stddev);
  double gamma(double shape, double scale);
  std::uint64_t next() { return engine_(); }

  Tensor uniform_tensor(Shape shape);
  Tensor normal_tensor(Shape shape, double mean, double stddev, bool requires_grad = false);
  std::vector<std::size_t> permutation(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Reparameterized Weibull draw: lam * (-log(1 - u))^(1/k). Values of `u`
/// outside the open unit interval are pulled into [kUniformLow, kUniformHigh].
Tensor weibull_sample(const Tensor& k, const Tensor& lam, const Tensor& u);
double weibull_sample(double k, double lam, double u);

/// lam * Gamma(1 + 1/k).
Tensor weibull_mean(const Tensor& k, const Tensor& lam);
double weibull_cdf(double x, double k, double lam);
double weibull_pdf(double x, double k, double lam);

/// KL(Weibull(k, lam) || Gamma(shape = alpha, rate)), closed form:
///
///   gE*alpha/k - alpha*log(lam) + log(k) + rate*lam*Gamma(1 + 1/k)
///     - gE - 1 - alpha*log(rate) + lgamma(alpha)
///
/// with gE the Euler-Mascheroni constant. Throws DomainError on a
/// non-positive argument.
double kl_weibull_gamma(double k, double lam, double alpha, double rate);

/// Elementwise KL; `alpha` and `rate` broadcast against `k`/`lam`.
Tensor kl_weibull_gamma(const Tensor& k, const Tensor& lam, const Tensor& alpha, const Tensor& rate);

}  // namespace topickg
