#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace topickg {

enum class Mode { kTopicKG, kTopicKGA };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct TrainConfig {
  Mode mode = Mode::kTopicKG;
  /// Topic-layer sizes K_1..K_L. Empty means "take them from the tree".
  std::vector<std::size_t> layers;
  std::size_t embedding_dim = 50;
  std::size_t hidden_dim = 256;
  std::size_t gcn_layers = 2;
  double beta = 50.0;
  double threshold = 0.4;
  std::size_t anneal_period = 200;
  std::size_t batch_size = 200;
  double learning_rate = 0.01;
  double weight_decay = 0.01;
  std::size_t iterations = 1000;
  std::uint64_t seed = 1;
  double gamma_prior = 0.1;
  double rate_prior = 1.0;
  double init_std = 0.02;
  double k_min = 0.1;
  double k_max = 10.0;
  double lam_min = 1e-4;
  double lam_max = 1e4;
  std::size_t log_every = 1;
  std::size_t checkpoint_every = 0;
  std::string checkpoint_path;

  /// Sets one field from its textual key; throws UsageError on an unknown
  /// key or a malformed value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  /// Throws UsageError when a field is out of range.
  void validate() const;

  /// `key = value` lines in keys() order.
  std::string to_text() const;
  static TrainConfig from_text(const std::string& text, const std::string& source = "<config>");
  static TrainConfig load(const std::filesystem::path& path);
};

}  // namespace topickg
