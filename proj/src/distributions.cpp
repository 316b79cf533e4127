#include "topickg/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "topickg/error.hpp"

namespace topickg {

double Rng::uniform() {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return std::clamp(dist(engine_), kUniformLow, kUniformHigh);
}

double Rng::normal(double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  return dist(engine_);
}

double Rng::gamma(double shape, double scale) {
  std::gamma_distribution<double> dist(shape, scale);
  return dist(engine_);
}

Tensor Rng::uniform_tensor(Shape shape) {
  std::vector<double> v(shape.size());
  for (double& x : v) x = uniform();
  return Tensor::from(shape, std::move(v));
}

Tensor Rng::normal_tensor(Shape shape, double mean, double stddev, bool requires_grad) {
  std::vector<double> v(shape.size());
  for (double& x : v) x = normal(mean, stddev);
  return Tensor::from(shape, std::move(v), requires_grad);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Fisher-Yates with explicit draws; std::shuffle's algorithm is unspecified.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(engine_() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

namespace {
double safe_u(double u) {
  if (!(u >= kUniformLow)) return kUniformLow;  // also catches NaN
  return std::min(u, kUniformHigh);
}
}  // namespace

Tensor weibull_sample(const Tensor& k, const Tensor& lam, const Tensor& u) {
  if (!(k.shape() == u.shape())) throw ShapeError("weibull_sample: k " + k.shape().str() + " vs u " + u.shape().str());
  std::vector<double> logw(u.size());
  const auto uv = u.values();
  for (std::size_t i = 0; i < uv.size(); ++i) logw[i] = std::log(-std::log1p(-safe_u(uv[i])));
  Tensor log_noise = Tensor::from(u.shape(), std::move(logw));
  return mul(lam, exp(div(log_noise, k)));
}

double weibull_sample(double k, double lam, double u) {
  return lam * std::pow(-std::log1p(-safe_u(u)), 1.0 / k);
}

Tensor weibull_mean(const Tensor& k, const Tensor& lam) {
  return mul(lam, exp(log_gamma(add_scalar(div(Tensor::scalar(1.0), k), 1.0))));
}

double weibull_cdf(double x, double k, double lam) {
  if (x <= 0.0) return 0.0;
  return -std::expm1(-std::pow(x / lam, k));
}

double weibull_pdf(double x, double k, double lam) {
  if (x < 0.0) return 0.0;
  const double z = x / lam;
  return (k / lam) * std::pow(z, k - 1.0) * std::exp(-std::pow(z, k));
}

double kl_weibull_gamma(double k, double lam, double alpha, double rate) {
  if (!(k > 0 && lam > 0 && alpha > 0 && rate > 0)) {
    throw DomainError("kl_weibull_gamma: arguments must be positive (k=" + std::to_string(k) +
                      ", lam=" + std::to_string(lam) + ", alpha=" + std::to_string(alpha) +
                      ", rate=" + std::to_string(rate) + ")");
  }
  return kEulerGamma * alpha / k - alpha * std::log(lam) + std::log(k) +
         rate * lam * std::exp(std::lgamma(1.0 + 1.0 / k)) - kEulerGamma - 1.0 - alpha * std::log(rate) +
         std::lgamma(alpha);
}

Tensor kl_weibull_gamma(const Tensor& k, const Tensor& lam, const Tensor& alpha, const Tensor& rate) {
  for (const Tensor* t : {&k, &lam, &alpha, &rate})
    for (double x : t->values())
      if (x <= 0.0) throw DomainError("kl_weibull_gamma: non-positive argument " + std::to_string(x));
  Tensor inv_k = div(Tensor::scalar(1.0), k);
  Tensor log_lam = log(lam);
  Tensor gamma_term = mul(mul(rate, lam), exp(log_gamma(add_scalar(inv_k, 1.0))));
  Tensor t = scale(mul(alpha, inv_k), kEulerGamma);
  t = sub(t, mul(alpha, log_lam));
  t = add(t, log(k));
  t = add(t, gamma_term);
  t = add_scalar(t, -kEulerGamma - 1.0);
  t = sub(t, mul(alpha, log(rate)));
  return add(t, log_gamma(alpha));
}

}  // namespace topickg
