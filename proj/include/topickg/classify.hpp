#pragma once

#include <cstdint>
#include <vector>

#include "topickg/tensor.hpp"

namespace topickg {

struct LogRegOptions {
  double l2 = 1e-4;
  std::size_t steps = 500;
  double learning_rate = 0.1;
  /// z-score features with training-set statistics before fitting.
  bool standardize = true;
  /// 0 starts from zero weights; otherwise small Gaussian weights from this seed.
  std::uint64_t init_seed = 0;
};

struct ClassificationResult {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::vector<int> predictions;
};

double micro_f1(const std::vector<int>& truth, const std::vector<int>& predicted);
/// Unweighted mean of per-class F1 over every class seen in either vector.
double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted);

/// Multinomial logistic regression fitted by full-batch gradient descent on
/// the training features, evaluated on the test features.
ClassificationResult classify_theta(const Tensor& train_x, const std::vector<int>& train_y, const Tensor& test_x,
                                    const std::vector<int>& test_y, const LogRegOptions& options = {});

}  // namespace topickg
