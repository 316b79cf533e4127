#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "topickg/classify.hpp"
#include "topickg/config.hpp"
#include "topickg/corpus.hpp"
#include "topickg/metrics.hpp"
#include "topickg/model.hpp"

namespace topickg {

struct LayerMetrics {
  std::size_t layer = 0;
  double tc = 0.0;  // mean NPMI over top-10 words
  double td = 0.0;  // unique fraction of top-25 words
  double we = 0.0;  // mean pairwise embedding cosine over top-10 words
};

struct EvalMetrics {
  std::vector<LayerMetrics> layers;
  bool has_classification = false;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::string> warnings;

  /// metric,layer,value rows; classification rows have an empty layer.
  void write_csv(const std::filesystem::path& path) const;
  std::string csv() const;
};

struct EvalOptions {
  std::size_t coherence_words = 10;
  std::size_t diversity_words = 25;
  /// External vectors for WE; the model's GCN-aggregated word embeddings otherwise.
  std::optional<EmbeddingTable> embeddings;
  bool classify = true;
  LogRegOptions logreg;
};

/// Topic-quality metrics per layer (NPMI reference = training split) and,
/// when the corpus is labeled and has both splits, classification on
/// deterministic layer-1 theta.
EvalMetrics evaluate(const ModelParams& params, const Tensor& normalized_adjacency, const Corpus& corpus,
                     const TrainConfig& config, const EvalOptions& options = {});

}  // namespace topickg
