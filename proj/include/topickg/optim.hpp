#pragma once

#include <string>
#include <utility>
#include <vector>

#include "topickg/tensor.hpp"

namespace topickg {

struct AdamWOptions {
  double learning_rate = 0.01;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// AdamW with decoupled weight decay and bias-corrected moments.
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor>> params, AdamWOptions options = {});

  /// Applies one update from the gradients currently accumulated on the
  /// parameters, then clears them. A non-finite gradient aborts the step
  /// before any parameter changes and throws NumericError naming it.
  void step();
  void zero_grad();

  long steps() const { return step_; }
  const AdamWOptions& options() const { return options_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  AdamWOptions options_;
  std::vector<std::vector<double>> m_, v_;
  long step_ = 0;
};

}  // namespace topickg
