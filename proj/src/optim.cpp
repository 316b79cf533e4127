#include "topickg/optim.hpp"

#include <cmath>

#include "topickg/error.hpp"

namespace topickg {

AdamW::AdamW(std::vector<std::pair<std::string, Tensor>> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void AdamW::step() {
  std::vector<std::vector<double>> grads;
  grads.reserve(params_.size());
  for (const auto& [name, p] : params_) {
    grads.push_back(p.grad());
    for (double g : grads.back())
      if (!std::isfinite(g)) throw NumericError("AdamW: non-finite gradient in parameter '" + name + "'");
  }
  ++step_;
  const auto& o = options_;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].second.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      w[j] *= 1.0 - o.learning_rate * o.weight_decay;
      w[j] -= o.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + o.eps);
    }
  }
  zero_grad();
}

void AdamW::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

}  // namespace topickg
