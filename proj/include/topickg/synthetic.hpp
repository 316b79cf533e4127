#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "topickg/corpus.hpp"
#include "topickg/taxonomy.hpp"

namespace topickg {

/// Generator settings for a corpus drawn from a known two-layer topic tree.
/// Each document draws gamma weights over groups and, inside each group,
/// over its leaves; tokens come from a leaf chosen by weight, or uniformly
/// from the vocabulary with probability `noise`.
///
/// Leaf topic t owns `words_per_topic` words; groups of `leaves_per_group`
/// leaves share a top-layer parent. Free topics own words that appear in
/// documents but are absent from the prior tree: the free topic node hangs
/// under the first group with no children or concepts, and its words have
/// no parent.
struct PlantedSpec {
  std::size_t num_docs = 500;
  std::size_t groups = 2;
  std::size_t leaves_per_group = 3;
  std::size_t words_per_topic = 10;
  std::size_t free_topics = 0;
  std::size_t noise_words = 20;
  double doc_length = 30.0;  // Poisson mean, at least one token per doc
  double group_dirichlet = 0.3;  // concentration over groups
  double dirichlet = 0.3;        // concentration over leaves within a group
  double noise = 0.2;        // token probability of a uniform vocabulary draw
  /// Concepts per leaf: its first few planted words.
  std::size_t concepts_per_topic = 10;
  /// When > 0 each document gets a class; class c boosts leaves t with t % num_classes == c.
  std::size_t num_classes = 0;
  double class_boost = 2.0;
  double test_fraction = 0.0;
  std::uint64_t seed = 1;
};

struct PlantedData {
  Corpus corpus;
  TopicTree tree;
  /// Planted word ids per leaf topic, free topics last.
  std::vector<std::vector<std::size_t>> topic_words;
  /// Layer-1 topic index of each free topic.
  std::vector<std::size_t> free_topic_index;
};

PlantedData make_planted(const PlantedSpec& spec);

}  // namespace topickg
