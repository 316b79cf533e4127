#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "topickg/tensor.hpp"

namespace topickg {

struct TopicNode {
  std::string name;
  std::size_t layer = 0;
  std::string definition;  // optional free text

  bool operator==(const TopicNode&) const = default;
};

/// Layered prior topic tree. Layer 0 holds the vocabulary (one node per
/// word, in vocabulary order); layers 1..L hold topic nodes. Node ids are
/// global: layer 0 first, then layer 1, and so on.
struct TopicTree {
  std::vector<TopicNode> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;     // (parent id, child id)
  std::vector<std::pair<std::size_t, std::size_t>> concepts;  // (topic id, word id)

  std::size_t num_nodes() const { return nodes.size(); }
  /// Number of topic layers L.
  std::size_t num_layers() const;
  std::vector<std::size_t> layer_sizes() const;  // K_0 .. K_L
  std::size_t layer_offset(std::size_t layer) const;
  std::size_t vocab_size() const { return layer_sizes().at(0); }

  void validate() const;
  bool operator==(const TopicTree&) const = default;
};

struct BuildReport {
  std::vector<std::string> unmatched_words;  // vocab words without a lexicon chain
  std::vector<std::size_t> layer_sizes;      // K_0 .. K_L
};

std::vector<std::pair<std::string, std::string>> read_lexicon(const std::filesystem::path& path);

/// Builds a tree whose leaves are vocabulary words with a hypernym chain.
/// Every chain is mapped onto exactly `max_layers` topic layers: chains that
/// are too long keep their lowest ancestors and merge the rest into the
/// root, chains that are too short repeat their direct parent. When chains
/// end in different tops a synthetic `<root>` joins them.
TopicTree build_tree(const std::vector<std::string>& vocab,
                     const std::vector<std::pair<std::string, std::string>>& hypernyms, std::size_t max_layers,
                     BuildReport* report = nullptr, const std::map<std::string, std::string>& definitions = {});

void write_tree(const TopicTree& tree, const std::filesystem::path& path);
TopicTree read_tree(const std::filesystem::path& path);

struct GraphMatrices {
  std::vector<std::size_t> layer_sizes;  // K_0 .. K_L
  std::vector<Tensor> S;                 // S[l-1] is K_{l-1} x K_l
  std::vector<Tensor> C;                 // C[l-1] is V x K_l
  Tensor adjacency;                      // N x N, symmetric, self-loops
  Tensor normalized;                     // D^-1/2 A D^-1/2

  std::size_t num_layers() const { return S.size(); }
  std::size_t offset(std::size_t layer) const;
  std::size_t num_nodes() const;
};

GraphMatrices to_matrices(const TopicTree& tree);

/// A from S and C blocks: symmetric, with self-loops.
Tensor adjacency_from_blocks(const std::vector<std::size_t>& layer_sizes, const std::vector<Tensor>& S,
                             const std::vector<Tensor>& C);
/// D^-1/2 A D^-1/2 with D the row sums of A.
Tensor normalize_adjacency(const Tensor& adjacency);

/// Row-softmax of pairwise cosine similarity between the columns of the
/// d x N adaptive embedding matrix.
Tensor adaptive_adjacency(const Tensor& adaptive_embeddings);

/// Normalized prior adjacency plus the adaptive one, without renormalizing.
Tensor revise_adjacency(const Tensor& normalized, const Tensor& adaptive);

}  // namespace topickg
