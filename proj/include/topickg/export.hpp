#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "topickg/model.hpp"
#include "topickg/taxonomy.hpp"

namespace topickg {

enum class ExportFormat { kText, kDot };

/// "text" or "dot"; anything else is a UsageError.
ExportFormat parse_export_format(const std::string& name);

struct ExportOptions {
  ExportFormat format = ExportFormat::kText;
  std::size_t top_k = 10;
  /// Structure edges whose Phi weight falls below this are left out.
  double min_weight = 0.0;
};

/// Learned hierarchy with per-topic keywords.
///
/// Text format, one record per line:
///   WORD <id> <name>
///   TOPIC <id> <layer> <name> <k> <kw_1> ... <kw_k>
///   EDGE <parent id> <child id> <phi weight> prior|new
///   CONCEPT <topic id> <word id> prior|new
/// `new` marks structure added by annealed updates.
std::string export_tree(const ModelParams& params, const TopicTree& tree, const std::vector<Tensor>& S,
                        const std::vector<Tensor>& C, const ExportOptions& options = {});

struct ExportedNode {
  std::size_t id = 0;
  std::size_t layer = 0;
  std::string name;
  std::vector<std::string> keywords;
};

struct ExportedEdge {
  std::size_t parent = 0;
  std::size_t child = 0;
  double weight = 0.0;
  bool added = false;
};

struct ExportedConcept {
  std::size_t topic = 0;
  std::size_t word = 0;
  bool added = false;
};

struct ExportedTree {
  std::vector<ExportedNode> nodes;
  std::vector<ExportedEdge> edges;
  std::vector<ExportedConcept> concepts;
};

ExportedTree parse_export(const std::string& text);

}  // namespace topickg
