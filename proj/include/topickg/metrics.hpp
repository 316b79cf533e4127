#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "topickg/corpus.hpp"
#include "topickg/tensor.hpp"

namespace topickg {

struct RankedWord {
  std::size_t word = 0;
  double prob = 0.0;
};

/// Word distribution of every layer-`layer` topic: Phi^(1) ... Phi^(layer),
/// V x K_layer. `phi[l-1]` is Phi^(l).
Tensor phi_chain(const std::vector<Tensor>& phi, std::size_t layer);

/// Top `n` words of one topic, probabilities descending, ties to the lower id.
std::vector<RankedWord> top_words(const std::vector<Tensor>& phi, std::size_t layer, std::size_t topic, std::size_t n);
/// Top `n` word ids for every topic of a layer.
std::vector<std::vector<std::size_t>> top_word_lists(const std::vector<Tensor>& phi, std::size_t layer, std::size_t n);

/// Document frequencies over a reference set of documents.
class DocFrequencies {
 public:
  DocFrequencies(const Corpus& corpus, const std::vector<std::size_t>& doc_ids);
  /// Over the training split.
  explicit DocFrequencies(const Corpus& corpus);

  std::size_t num_docs() const { return num_docs_; }
  std::size_t df(std::size_t word) const;
  std::size_t co_df(std::size_t a, std::size_t b) const;

 private:
  std::size_t num_docs_ = 0;
  std::vector<std::vector<std::uint32_t>> postings_;  // sorted doc positions per word
};

inline constexpr double kNpmiEpsilon = 1e-12;

/// ln[p(a,b) / (p(a) p(b))] / -ln p(a,b). A zero joint probability is
/// replaced by kNpmiEpsilon; a joint probability of one scores 1.
double npmi(const DocFrequencies& freq, std::size_t a, std::size_t b);

struct CoherenceResult {
  double mean = 0.0;                // over topics with at least one scored pair
  std::vector<double> per_topic;    // NaN for topics without a scored pair
  std::size_t skipped_pairs = 0;    // pairs with a word absent from the reference docs
  std::vector<std::string> warnings;
};

CoherenceResult topic_coherence_npmi(const std::vector<std::vector<std::size_t>>& topics, const DocFrequencies& freq);

/// Unique words / total words over all lists (each list is one topic's top words).
double topic_diversity(const std::vector<std::vector<std::size_t>>& topics);

/// One row per vocabulary word; an empty row marks a missing embedding.
using EmbeddingTable = std::vector<std::vector<double>>;

/// Word columns of a d x N embedding matrix (the first V columns).
EmbeddingTable embeddings_from_matrix(const Tensor& embeddings, std::size_t vocab_size);
/// Text vectors, one `word v1 v2 ...` per line, mapped onto `vocab`.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const std::vector<std::string>& vocab);

struct EmbeddingCoherence {
  double mean = 0.0;
  std::size_t missing_words = 0;
  std::vector<std::string> warnings;
};

/// Mean over topics of the mean pairwise cosine among each topic's words.
EmbeddingCoherence word_embedding_coherence(const std::vector<std::vector<std::size_t>>& topics,
                                            const EmbeddingTable& embeddings);

}  // namespace topickg
