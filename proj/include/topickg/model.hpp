#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "topickg/config.hpp"
#include "topickg/distributions.hpp"
#include "topickg/tensor.hpp"

namespace topickg {

/// Upward residual block plus the downward Weibull heads of one topic layer.
struct EncoderLayer {
  // Residual block h + W2 relu(W1 h + b1) + b2, all H x H.
  Tensor block_w1, block_b1, block_w2, block_b2;
  // k-hat = relu(h Wk + bk), lam-hat = relu(h Wl + bl); H x K_l.
  Tensor shape_w, shape_b, scale_w, scale_b;
  // Heads over [prior (+) hat], 2K_l x K_l.
  Tensor shape_head_w, shape_head_b, scale_head_w, scale_head_b;
};

/// Learnable state of a TopicKG / TopicKGA model.
///
/// Embeddings are stored column-per-node (d x N) in the global node order
/// of the topic tree. Documents travel as rows, so encoder weights map
/// row vectors: a batch is B x V and theta at layer l is B x K_l.
struct ModelParams {
  std::vector<std::size_t> layer_sizes;  // K_0 .. K_L
  std::size_t dim = 0;
  std::size_t hidden = 0;

  Tensor embeddings;           // E, d x N
  Tensor adaptive_embeddings;  // E_A, d x N; undefined for TopicKG
  Tensor edge_w;               // W, d x d
  std::vector<Tensor> gcn;     // T weights, d x d

  Tensor input_w, input_b;  // V x H, 1 x H
  std::vector<EncoderLayer> encoder;
  Tensor top_prior;  // 1 x K_L, passed through softplus

  std::vector<double> gamma;  // top-layer Gamma shape, K_L entries
  double rate = 1.0;          // Gamma rate c for every layer

  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t num_nodes() const;
  bool adaptive() const { return adaptive_embeddings.defined(); }

  /// Every learnable tensor with a stable name, in a fixed order.
  std::vector<std::pair<std::string, Tensor>> named() const;
  /// Deep copy with gradients detached.
  ModelParams clone() const;
};

ModelParams init_params(const std::vector<std::size_t>& layer_sizes, const TrainConfig& config, Rng& rng);

struct ClampBounds {
  double k_min = 0.1, k_max = 10.0;
  double lam_min = 1e-4, lam_max = 1e4;

  static ClampBounds from(const TrainConfig& c) { return {c.k_min, c.k_max, c.lam_min, c.lam_max}; }
};

/// Residual ReLU graph convolution: E <- E + relu(Wg E A), once per weight.
Tensor gcn_forward(const Tensor& adjacency, const Tensor& embeddings, const std::vector<Tensor>& weights);

/// Columns of `embeddings` belonging to `layer`.
Tensor layer_embeddings(const Tensor& embeddings, const std::vector<std::size_t>& layer_sizes, std::size_t layer);

/// Phi[l-1] is K_{l-1} x K_l with column k = softmax_i(e_i^(l-1) . e_k^(l)).
std::vector<Tensor> compute_phi(const Tensor& embeddings, const std::vector<std::size_t>& layer_sizes);

/// Bernoulli log-likelihood of every entry of every S (logit e^T W e') and
/// C (logit e_v^T e_k), dense over all pairs.
Tensor edge_log_probs(const Tensor& embeddings, const Tensor& edge_w, const std::vector<Tensor>& S,
                      const std::vector<Tensor>& C, const std::vector<std::size_t>& layer_sizes);

struct VariationalState {
  // Index l-1 holds layer l.
  std::vector<Tensor> hidden;
  std::vector<Tensor> shape;  // k
  std::vector<Tensor> scale;  // lambda
  std::vector<Tensor> theta;
};

/// Weibull upward-downward encoder. With `deterministic` theta is the
/// Weibull mean instead of a reparameterized draw and `rng` is unused.
VariationalState encode(const Tensor& counts, const std::vector<Tensor>& phi, const ModelParams& params,
                        const ClampBounds& bounds, Rng& rng, bool deterministic = false);

inline constexpr double kRateFloor = 1e-10;

/// sum_v x log(rate) - rate - lgamma(x + 1) with rate = theta Phi^T
/// floored at kRateFloor, summed over the batch.
Tensor poisson_log_lik(const Tensor& counts, const Tensor& phi1, const Tensor& theta1);

}  // namespace topickg
