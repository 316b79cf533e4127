#include "topickg/model.hpp"

#include <cmath>

#include "topickg/error.hpp"

namespace topickg {

std::size_t ModelParams::num_nodes() const {
  std::size_t n = 0;
  for (auto k : layer_sizes) n += k;
  return n;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embeddings", embeddings);
  if (adaptive()) out.emplace_back("adaptive_embeddings", adaptive_embeddings);
  out.emplace_back("edge_w", edge_w);
  for (std::size_t t = 0; t < gcn.size(); ++t) out.emplace_back("gcn." + std::to_string(t), gcn[t]);
  out.emplace_back("input_w", input_w);
  out.emplace_back("input_b", input_b);
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    const auto& e = encoder[l];
    const std::string p = "encoder." + std::to_string(l + 1) + ".";
    out.emplace_back(p + "block_w1", e.block_w1);
    out.emplace_back(p + "block_b1", e.block_b1);
    out.emplace_back(p + "block_w2", e.block_w2);
    out.emplace_back(p + "block_b2", e.block_b2);
    out.emplace_back(p + "shape_w", e.shape_w);
    out.emplace_back(p + "shape_b", e.shape_b);
    out.emplace_back(p + "scale_w", e.scale_w);
    out.emplace_back(p + "scale_b", e.scale_b);
    out.emplace_back(p + "shape_head_w", e.shape_head_w);
    out.emplace_back(p + "shape_head_b", e.shape_head_b);
    out.emplace_back(p + "scale_head_w", e.scale_head_w);
    out.emplace_back(p + "scale_head_b", e.scale_head_b);
  }
  out.emplace_back("top_prior", top_prior);
  return out;
}

ModelParams ModelParams::clone() const {
  auto copy = [](const Tensor& t) {
    if (!t.defined()) return Tensor{};
    Tensor c = t.detach();
    c.set_requires_grad(t.requires_grad());
    return c;
  };
  ModelParams p = *this;
  p.embeddings = copy(embeddings);
  p.adaptive_embeddings = copy(adaptive_embeddings);
  p.edge_w = copy(edge_w);
  for (auto& g : p.gcn) g = copy(g);
  p.input_w = copy(input_w);
  p.input_b = copy(input_b);
  for (auto& e : p.encoder) {
    for (Tensor* t : {&e.block_w1, &e.block_b1, &e.block_w2, &e.block_b2, &e.shape_w, &e.shape_b, &e.scale_w,
                      &e.scale_b, &e.shape_head_w, &e.shape_head_b, &e.scale_head_w, &e.scale_head_b})
      *t = copy(*t);
  }
  p.top_prior = copy(top_prior);
  return p;
}

namespace {

Tensor glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  return rng.normal_tensor({fan_in, fan_out}, 0.0, stddev, true);
}

Tensor zeros_param(Shape s) { return Tensor::zeros(s, true); }

// softplus(x) = 1, so k and lambda start near one instead of at a clamp.
const double kUnitSoftplus = std::log(std::exp(1.0) - 1.0);

}  // namespace

ModelParams init_params(const std::vector<std::size_t>& layer_sizes, const TrainConfig& config, Rng& rng) {
  if (layer_sizes.size() < 2) throw UsageError("init_params: need at least one topic layer");
  ModelParams p;
  p.layer_sizes = layer_sizes;
  p.dim = config.embedding_dim;
  p.hidden = config.hidden_dim;
  const std::size_t d = p.dim, H = p.hidden, N = p.num_nodes(), V = layer_sizes[0], L = p.num_layers();

  p.embeddings = rng.normal_tensor({d, N}, 0.0, config.init_std, true);
  if (config.mode == Mode::kTopicKGA) p.adaptive_embeddings = rng.normal_tensor({d, N}, 0.0, config.init_std, true);
  p.edge_w = Tensor::zeros({d, d}, true);
  for (std::size_t i = 0; i < d; ++i) p.edge_w.mutable_values()[i * d + i] = 1.0;
  for (std::size_t t = 0; t < config.gcn_layers; ++t) p.gcn.push_back(glorot(rng, d, d));

  p.input_w = glorot(rng, V, H);
  p.input_b = zeros_param({1, H});
  for (std::size_t l = 1; l <= L; ++l) {
    const std::size_t K = layer_sizes[l];
    EncoderLayer e;
    e.block_w1 = glorot(rng, H, H);
    e.block_b1 = zeros_param({1, H});
    e.block_w2 = glorot(rng, H, H);
    e.block_b2 = zeros_param({1, H});
    e.shape_w = glorot(rng, H, K);
    e.shape_b = zeros_param({1, K});
    e.scale_w = glorot(rng, H, K);
    e.scale_b = zeros_param({1, K});
    e.shape_head_w = rng.normal_tensor({2 * K, K}, 0.0, config.init_std, true);
    e.shape_head_b = Tensor::full({1, K}, kUnitSoftplus, true);
    e.scale_head_w = rng.normal_tensor({2 * K, K}, 0.0, config.init_std, true);
    e.scale_head_b = Tensor::full({1, K}, kUnitSoftplus, true);
    p.encoder.push_back(std::move(e));
  }
  p.top_prior = zeros_param({1, layer_sizes[L]});
  p.gamma.assign(layer_sizes[L], config.gamma_prior);
  p.rate = config.rate_prior;
  return p;
}

Tensor gcn_forward(const Tensor& adjacency, const Tensor& embeddings, const std::vector<Tensor>& weights) {
  const std::size_t N = embeddings.cols();
  if (adjacency.rows() != N || adjacency.cols() != N)
    throw ShapeError("gcn_forward: adjacency " + adjacency.shape().str() + " for embeddings " +
                     embeddings.shape().str());
  Tensor e = embeddings;
  for (const Tensor& w : weights) {
    if (w.rows() != e.rows() || w.cols() != e.rows())
      throw ShapeError("gcn_forward: weight " + w.shape().str() + " for embeddings " + e.shape().str());
    e = add(e, relu(matmul(matmul(w, e), adjacency)));
  }
  return e;
}

Tensor layer_embeddings(const Tensor& embeddings, const std::vector<std::size_t>& layer_sizes, std::size_t layer) {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += layer_sizes.at(l);
  return slice_cols(embeddings, off, off + layer_sizes.at(layer));
}

std::vector<Tensor> compute_phi(const Tensor& embeddings, const std::vector<std::size_t>& layer_sizes) {
  std::vector<Tensor> phi;
  Tensor below = layer_embeddings(embeddings, layer_sizes, 0);
  for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
    Tensor here = layer_embeddings(embeddings, layer_sizes, l);
    phi.push_back(softmax_cols(matmul(transpose(below), here)));
    below = here;
  }
  return phi;
}

namespace {
// sum(y * z - softplus(z)) = sum of y log sigmoid(z) + (1 - y) log(1 - sigmoid(z)).
Tensor bernoulli_log_lik(const Tensor& targets, const Tensor& logits) {
  if (!(targets.shape() == logits.shape()))
    throw ShapeError("edge likelihood: structure " + targets.shape().str() + " vs logits " + logits.shape().str());
  return sum(sub(mul(targets, logits), softplus(logits)));
}
}  // namespace

Tensor edge_log_probs(const Tensor& embeddings, const Tensor& edge_w, const std::vector<Tensor>& S,
                      const std::vector<Tensor>& C, const std::vector<std::size_t>& layer_sizes) {
  const std::size_t L = layer_sizes.size() - 1;
  if (S.size() != L || C.size() != L) throw ShapeError("edge_log_probs: expected one S and C block per layer");
  Tensor words_t = transpose(layer_embeddings(embeddings, layer_sizes, 0));
  Tensor below_t = words_t;
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t l = 1; l <= L; ++l) {
    Tensor here = layer_embeddings(embeddings, layer_sizes, l);
    total = add(total, bernoulli_log_lik(S[l - 1], matmul(matmul(below_t, edge_w), here)));
    total = add(total, bernoulli_log_lik(C[l - 1], matmul(words_t, here)));
    below_t = transpose(here);
  }
  return total;
}

VariationalState encode(const Tensor& counts, const std::vector<Tensor>& phi, const ModelParams& params,
                        const ClampBounds& bounds, Rng& rng, bool deterministic) {
  const std::size_t L = params.num_layers(), B = counts.rows();
  if (counts.cols() != params.layer_sizes[0])
    throw ShapeError("encode: counts " + counts.shape().str() + " for vocabulary of " +
                     std::to_string(params.layer_sizes[0]));
  if (phi.size() != L) throw ShapeError("encode: expected " + std::to_string(L) + " Phi matrices");

  VariationalState st;
  Tensor h = add(matmul(counts, params.input_w), params.input_b);
  for (std::size_t l = 1; l <= L; ++l) {
    const auto& e = params.encoder[l - 1];
    Tensor inner = relu(add(matmul(h, e.block_w1), e.block_b1));
    h = add(h, add(matmul(inner, e.block_w2), e.block_b2));
    st.hidden.push_back(h);
  }
  st.shape.resize(L);
  st.scale.resize(L);
  st.theta.resize(L);
  const Tensor ones = Tensor::full({B, 1}, 1.0);
  for (std::size_t l = L; l >= 1; --l) {
    const auto& e = params.encoder[l - 1];
    const Tensor& hl = st.hidden[l - 1];
    Tensor shape_hat = relu(add(matmul(hl, e.shape_w), e.shape_b));
    Tensor scale_hat = relu(add(matmul(hl, e.scale_w), e.scale_b));
    Tensor prior = l == L ? matmul(ones, softplus(params.top_prior)) : matmul(st.theta[l], transpose(phi[l]));
    Tensor k = softplus(add(matmul(concat_cols(prior, shape_hat), e.shape_head_w), e.shape_head_b));
    Tensor lam = softplus(add(matmul(concat_cols(prior, scale_hat), e.scale_head_w), e.scale_head_b));
    k = clamp(k, bounds.k_min, bounds.k_max);
    lam = clamp(lam, bounds.lam_min, bounds.lam_max);
    st.shape[l - 1] = k;
    st.scale[l - 1] = lam;
    st.theta[l - 1] = deterministic ? weibull_mean(k, lam) : weibull_sample(k, lam, rng.uniform_tensor(k.shape()));
  }
  return st;
}

Tensor poisson_log_lik(const Tensor& counts, const Tensor& phi1, const Tensor& theta1) {
  if (phi1.rows() != counts.cols() || theta1.cols() != phi1.cols() || theta1.rows() != counts.rows())
    throw ShapeError("poisson_log_lik: counts " + counts.shape().str() + ", Phi " + phi1.shape().str() + ", theta " +
                     theta1.shape().str());
  Tensor rate = clamp(matmul(theta1, transpose(phi1)), kRateFloor, INFINITY);
  double log_factorials = 0.0;
  for (double x : counts.values()) log_factorials += std::lgamma(x + 1.0);
  return add_scalar(sub(sum(mul(counts, log(rate))), sum(rate)), -log_factorials);
}

}  // namespace topickg
