#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "topickg/tensor.hpp"

namespace topickg {

/// Sparse bag of words; entries sorted by word id, counts > 0.
struct Document {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;

  std::uint64_t length() const;
  bool operator==(const Document&) const = default;
};

struct Corpus {
  std::vector<std::string> vocab;
  std::vector<Document> docs;
  std::vector<int> labels;    // empty when unlabeled, else one per doc
  std::vector<bool> is_test;  // one per doc

  std::size_t vocab_size() const { return vocab.size(); }
  std::size_t num_docs() const { return docs.size(); }
  bool has_labels() const { return !labels.empty(); }
  std::vector<std::size_t> train_ids() const;
  std::vector<std::size_t> test_ids() const;

  /// Throws if any structural invariant is broken.
  void validate() const;
};

enum class DocFormat { kAuto, kText, kTriplets };

struct LoadOptions {
  std::optional<std::filesystem::path> vocab_path;
  std::optional<std::filesystem::path> labels_path;
  std::optional<std::filesystem::path> split_path;
  std::optional<std::filesystem::path> stopwords_path;
  /// Minimum corpus-wide occurrences when the vocabulary is built here.
  std::size_t min_count = 20;
  /// Keep at most this many words (most frequent first); 0 = no cap.
  std::size_t max_vocab = 0;
  DocFormat format = DocFormat::kAuto;
};

struct LoadReport {
  std::vector<std::size_t> dropped_docs;  // 0-based source document indices
  std::vector<std::string> warnings;
};

/// Reads either one whitespace-tokenized document per line, or sparse
/// `doc_id word_id count` triplets (which need a vocabulary file). Documents
/// left empty after filtering are dropped and listed in the report.
Corpus load_corpus(const std::filesystem::path& docs_path, const LoadOptions& options = {},
                   LoadReport* report = nullptr);

/// Builds a corpus from in-memory tokenized documents against a fixed vocabulary.
Corpus corpus_from_tokens(const std::vector<std::vector<std::string>>& docs, std::vector<std::string> vocab,
                          LoadReport* report = nullptr);

/// Writes `<stem>.vocab`, `<stem>.triplets`, `<stem>.split` and, when
/// labeled, `<stem>.labels` next to each other.
void save_corpus(const Corpus& corpus, const std::filesystem::path& stem);
Corpus load_saved_corpus(const std::filesystem::path& stem);

/// Marks a seed-determined fraction of documents as test.
void assign_random_split(Corpus& corpus, double test_fraction, std::uint64_t seed);

struct Batch {
  std::vector<std::size_t> doc_ids;
  Tensor counts;  // doc_ids.size() x V
};

Tensor dense_counts(const Corpus& corpus, const std::vector<std::size_t>& ids);

/// One epoch over the training split in a seed-determined order.
std::vector<Batch> batches(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed);

/// Endless stream of training batches, reshuffled every epoch.
class BatchSampler {
 public:
  BatchSampler(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed);
  Batch next();
  std::size_t epoch() const { return epoch_; }

 private:
  const Corpus* corpus_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

}  // namespace topickg
