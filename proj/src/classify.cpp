#include "topickg/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "topickg/distributions.hpp"
#include "topickg/error.hpp"

namespace topickg {

double micro_f1(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) throw ShapeError("micro_f1: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == predicted[i];
  // Single-label multiclass: micro precision = micro recall = accuracy.
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) throw ShapeError("macro_f1: length mismatch");
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(predicted.begin(), predicted.end());
  if (classes.empty()) return 0.0;
  double total = 0.0;
  for (int c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == c, p = predicted[i] == c;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp + fn);
    total += denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
  }
  return total / static_cast<double>(classes.size());
}

ClassificationResult classify_theta(const Tensor& train_x, const std::vector<int>& train_y, const Tensor& test_x,
                                    const std::vector<int>& test_y, const LogRegOptions& options) {
  const std::size_t n = train_x.rows(), f = train_x.cols();
  if (train_y.size() != n || test_y.size() != test_x.rows()) throw ShapeError("classify_theta: label count mismatch");
  if (test_x.cols() != f) throw ShapeError("classify_theta: feature width differs between train and test");
  std::set<int> seen(train_y.begin(), train_y.end());
  if (seen.size() < 2) throw DomainError("classify_theta: training data has a single class");
  if (*seen.begin() < 0) throw DomainError("classify_theta: labels must be non-negative");
  const std::size_t classes = static_cast<std::size_t>(*seen.rbegin()) + 1;

  std::vector<double> mu(f, 0.0), sd(f, 1.0);
  if (options.standardize) {
    for (std::size_t j = 0; j < f; ++j) {
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += train_x.values()[i * f + j];
      mu[j] = s / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = train_x.values()[i * f + j] - mu[j];
        s2 += d * d;
      }
      const double v = std::sqrt(s2 / static_cast<double>(n));
      sd[j] = v > 0.0 ? v : 1.0;
    }
  }
  auto features = [&](const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < f; ++j) out[i * f + j] = (x.values()[i * f + j] - mu[j]) / sd[j];
    return out;
  };
  const std::vector<double> xtr = features(train_x), xte = features(test_x);

  std::vector<double> w(f * classes, 0.0), b(classes, 0.0);
  if (options.init_seed != 0) {
    Rng rng(options.init_seed);
    for (double& v : w) v = rng.normal(0.0, 0.01);
  }
  auto logits_row = [&](const std::vector<double>& x, std::size_t i, std::vector<double>& out) {
    for (std::size_t c = 0; c < classes; ++c) {
      double z = b[c];
      for (std::size_t j = 0; j < f; ++j) z += x[i * f + j] * w[j * classes + c];
      out[c] = z;
    }
  };
  std::vector<double> z(classes), gw(w.size()), gb(classes);
  for (std::size_t step = 0; step < options.steps; ++step) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      logits_row(xtr, i, z);
      const double mx = *std::max_element(z.begin(), z.end());
      double total = 0.0;
      for (double& v : z) total += (v = std::exp(v - mx));
      for (std::size_t c = 0; c < classes; ++c) {
        const double g = z[c] / total - (static_cast<std::size_t>(train_y[i]) == c ? 1.0 : 0.0);
        gb[c] += g;
        for (std::size_t j = 0; j < f; ++j) gw[j * classes + c] += g * xtr[i * f + j];
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= options.learning_rate * (gw[k] * inv_n + options.l2 * w[k]);
    for (std::size_t c = 0; c < classes; ++c) b[c] -= options.learning_rate * gb[c] * inv_n;
  }

  ClassificationResult r;
  for (std::size_t i = 0; i < test_x.rows(); ++i) {
    logits_row(xte, i, z);
    r.predictions.push_back(static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()));
  }
  r.micro_f1 = micro_f1(test_y, r.predictions);
  r.macro_f1 = macro_f1(test_y, r.predictions);
  return r;
}

}  // namespace topickg
