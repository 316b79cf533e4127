#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "topickg/config.hpp"
#include "topickg/model.hpp"
#include "topickg/taxonomy.hpp"

namespace topickg {

/// On-disk layout:
///
///   TOPICKG-CHECKPOINT 1\n
///   manifest <bytes>\n <manifest text>
///   arrays <count>\n
///   then per array: "<name> <rows> <cols>\n" and rows*cols little-endian
///   IEEE-754 doubles.
///
/// The manifest holds the training config and one `node <id> <layer> <name>`
/// line per tree node, in global order.
struct Checkpoint {
  TrainConfig config;
  std::vector<TopicNode> nodes;
  std::vector<std::pair<std::string, Tensor>> arrays;

  const Tensor& array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Packs parameters, prior hyperparameters and the current structure blocks
/// (`structure.S.<l>`, `structure.C.<l>`).
Checkpoint make_checkpoint(const ModelParams& params, const TrainConfig& config, const TopicTree& tree,
                           const std::vector<Tensor>& S, const std::vector<Tensor>& C);

ModelParams params_from_checkpoint(const Checkpoint& ckpt);

}  // namespace topickg
