#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <tuple>
#include <vector>

#include "topickg/config.hpp"
#include "topickg/corpus.hpp"
#include "topickg/model.hpp"
#include "topickg/taxonomy.hpp"

namespace topickg {

/// Graph-side quantities of one forward pass.
struct ForwardGraph {
  Tensor adaptive;    // row-softmax cosine adjacency, undefined for TopicKG
  Tensor adjacency;   // adjacency fed to the GCN (prior or revised)
  Tensor embeddings;  // E after T GCN layers
  std::vector<Tensor> phi;
};

ForwardGraph graph_forward(const ModelParams& params, const Tensor& normalized_adjacency);

struct ElboTerms {
  double reconstruction = 0.0;  // sum_j log p(x_j | Phi, theta)
  double graph_ll = 0.0;        // Bernoulli log-likelihood of S and C
  double graph = 0.0;           // beta * graph_ll
  double kl = 0.0;              // sum_j sum_l KL(q || p)
  double total = 0.0;           // reconstruction + graph - kl
};

struct ElboResult {
  Tensor objective;  // scalar, differentiable
  ElboTerms terms;
  VariationalState state;
};

/// Single-sample ELBO of a batch. The graph term enters once per call,
/// regardless of batch size. Throws NumericError with the decomposition if
/// any term is non-finite.
ElboResult elbo(const Tensor& counts, const ModelParams& params, const ForwardGraph& graph,
                const std::vector<Tensor>& S, const std::vector<Tensor>& C, const TrainConfig& config, Rng& rng);

ElboResult elbo(const Tensor& counts, const ModelParams& params, const Tensor& normalized_adjacency,
                const std::vector<Tensor>& S, const std::vector<Tensor>& C, const TrainConfig& config, Rng& rng);

/// (layer l, row, col) of an S^(l) or C^(l) entry.
using EdgeRef = std::tuple<std::size_t, std::size_t, std::size_t>;

struct RevisionEvent {
  std::size_t iteration = 0;
  std::vector<EdgeRef> added_s, removed_s, added_c, removed_c;
};

struct StructureUpdate {
  std::vector<Tensor> S, C;
  RevisionEvent event;
};

/// Thresholds the S and C sub-blocks of the revised adjacency at `threshold`
/// and unions the result with the prior structure, so prior edges are never
/// removed. The event records the change relative to `current_S`/`current_C`.
StructureUpdate anneal_update(const Tensor& revised_adjacency, const std::vector<std::size_t>& layer_sizes,
                              const std::vector<Tensor>& prior_S, const std::vector<Tensor>& prior_C,
                              const std::vector<Tensor>& current_S, const std::vector<Tensor>& current_C,
                              double threshold);

struct IterationRecord {
  std::size_t iteration = 0;
  double nll = 0.0;  // per-document negative Poisson log-likelihood
  double graph_ll = 0.0;
  double kl = 0.0;  // per document
  double elbo = 0.0;
  double wall_ms = 0.0;
  ElboTerms terms;
};

struct TrainReport {
  std::vector<IterationRecord> records;
  std::vector<RevisionEvent> revisions;

  /// iteration,nll,graph_ll,kl,elbo,wall_ms
  void write_csv(const std::filesystem::path& path) const;
  /// iteration,kind,layer,row,col with kind in {add_S, remove_S, add_C, remove_C}
  void write_revisions_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
  std::vector<Tensor> S, C;  // structure in force at the end of training
};

/// Optional per-iteration observer, called after the optimizer step.
using IterationCallback = std::function<void(const IterationRecord&, const ModelParams&)>;

TrainResult train(const Corpus& corpus, const TopicTree& tree, const TrainConfig& config,
                  const IterationCallback& on_iteration = {});

/// Per-layer theta for the given documents using Weibull means.
std::vector<Tensor> infer_theta(const ModelParams& params, const Tensor& normalized_adjacency, const Corpus& corpus,
                                const std::vector<std::size_t>& doc_ids, const TrainConfig& config);

}  // namespace topickg
