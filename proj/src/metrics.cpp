#include "topickg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "topickg/error.hpp"

namespace topickg {

Tensor phi_chain(const std::vector<Tensor>& phi, std::size_t layer) {
  if (layer < 1 || layer > phi.size()) throw UsageError("phi_chain: layer " + std::to_string(layer) + " out of range");
  Tensor out = phi[0].detach();
  for (std::size_t l = 1; l < layer; ++l) out = matmul(out, phi[l].detach());
  return out;
}

std::vector<RankedWord> top_words(const std::vector<Tensor>& phi, std::size_t layer, std::size_t topic, std::size_t n) {
  const Tensor m = phi_chain(phi, layer);
  const std::size_t V = m.rows();
  if (n > V) throw UsageError("top_words: n = " + std::to_string(n) + " exceeds vocabulary size " + std::to_string(V));
  if (topic >= m.cols()) throw UsageError("top_words: topic " + std::to_string(topic) + " out of range");
  std::vector<RankedWord> all(V);
  for (std::size_t v = 0; v < V; ++v) all[v] = {v, m.values()[v * m.cols() + topic]};
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                    [](const RankedWord& a, const RankedWord& b) { return a.prob != b.prob ? a.prob > b.prob : a.word < b.word; });
  all.resize(n);
  return all;
}

std::vector<std::vector<std::size_t>> top_word_lists(const std::vector<Tensor>& phi, std::size_t layer, std::size_t n) {
  const std::size_t K = phi.at(layer - 1).cols();
  std::vector<std::vector<std::size_t>> lists;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t> ids;
    for (const auto& rw : top_words(phi, layer, k, n)) ids.push_back(rw.word);
    lists.push_back(std::move(ids));
  }
  return lists;
}

DocFrequencies::DocFrequencies(const Corpus& corpus, const std::vector<std::size_t>& doc_ids)
    : num_docs_(doc_ids.size()), postings_(corpus.vocab_size()) {
  for (std::size_t pos = 0; pos < doc_ids.size(); ++pos)
    for (const auto& [w, c] : corpus.docs.at(doc_ids[pos]).entries) postings_[w].push_back(static_cast<std::uint32_t>(pos));
}

DocFrequencies::DocFrequencies(const Corpus& corpus) : DocFrequencies(corpus, corpus.train_ids()) {}

std::size_t DocFrequencies::df(std::size_t word) const { return postings_.at(word).size(); }

std::size_t DocFrequencies::co_df(std::size_t a, std::size_t b) const {
  const auto& pa = postings_.at(a);
  const auto& pb = postings_.at(b);
  std::size_t i = 0, j = 0, n = 0;
  while (i < pa.size() && j < pb.size()) {
    if (pa[i] < pb[j]) ++i;
    else if (pb[j] < pa[i]) ++j;
    else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

double npmi(const DocFrequencies& freq, std::size_t a, std::size_t b) {
  const double D = static_cast<double>(freq.num_docs());
  const double pa = static_cast<double>(freq.df(a)) / D;
  const double pb = static_cast<double>(freq.df(b)) / D;
  double pab = static_cast<double>(freq.co_df(a, b)) / D;
  if (pab >= 1.0) return 1.0;
  if (pab == 0.0) pab = kNpmiEpsilon;
  const double v = (std::log(pab) - std::log(pa) - std::log(pb)) / -std::log(pab);
  return std::clamp(v, -1.0, 1.0);
}

CoherenceResult topic_coherence_npmi(const std::vector<std::vector<std::size_t>>& topics, const DocFrequencies& freq) {
  CoherenceResult r;
  double total = 0.0;
  std::size_t scored_topics = 0;
  std::unordered_set<std::size_t> absent;
  for (const auto& words : topics) {
    double s = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
      for (std::size_t j = i + 1; j < words.size(); ++j) {
        if (freq.df(words[i]) == 0 || freq.df(words[j]) == 0) {
          ++r.skipped_pairs;
          if (freq.df(words[i]) == 0) absent.insert(words[i]);
          if (freq.df(words[j]) == 0) absent.insert(words[j]);
          continue;
        }
        s += npmi(freq, words[i], words[j]);
        ++pairs;
      }
    }
    if (pairs == 0) {
      r.per_topic.push_back(NAN);
      continue;
    }
    r.per_topic.push_back(s / static_cast<double>(pairs));
    total += r.per_topic.back();
    ++scored_topics;
  }
  r.mean = scored_topics ? total / static_cast<double>(scored_topics) : 0.0;
  if (r.skipped_pairs > 0)
    r.warnings.push_back(std::to_string(absent.size()) + " topic words absent from the reference corpus; " +
                         std::to_string(r.skipped_pairs) + " pairs skipped");
  return r;
}

double topic_diversity(const std::vector<std::vector<std::size_t>>& topics) {
  std::unordered_set<std::size_t> unique;
  std::size_t total = 0;
  for (const auto& t : topics) {
    unique.insert(t.begin(), t.end());
    total += t.size();
  }
  return total ? static_cast<double>(unique.size()) / static_cast<double>(total) : 0.0;
}

EmbeddingTable embeddings_from_matrix(const Tensor& embeddings, std::size_t vocab_size) {
  if (embeddings.cols() < vocab_size) throw ShapeError("embeddings_from_matrix: fewer columns than words");
  const std::size_t d = embeddings.rows(), N = embeddings.cols();
  EmbeddingTable t(vocab_size, std::vector<double>(d));
  for (std::size_t v = 0; v < vocab_size; ++v)
    for (std::size_t i = 0; i < d; ++i) t[v][i] = embeddings.values()[i * N + v];
  return t;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const std::vector<std::string>& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t v = 0; v < vocab.size(); ++v) index.emplace(vocab[v], v);
  EmbeddingTable t(vocab.size());
  std::string line;
  std::size_t lineno = 0, dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream is(line);
    std::string word;
    if (!(is >> word)) continue;
    std::vector<double> vec;
    double x;
    while (is >> x) vec.push_back(x);
    if (!is.eof()) throw ParseError(path.string(), lineno, "non-numeric vector component");
    if (vec.size() < 2) continue;  // word2vec header line "count dim"
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim) throw ParseError(path.string(), lineno, "inconsistent vector dimension");
    auto it = index.find(word);
    if (it != index.end()) t[it->second] = std::move(vec);
  }
  return t;
}

EmbeddingCoherence word_embedding_coherence(const std::vector<std::vector<std::size_t>>& topics,
                                            const EmbeddingTable& embeddings) {
  EmbeddingCoherence r;
  double total = 0.0;
  std::size_t scored = 0;
  for (const auto& words : topics) {
    std::vector<const std::vector<double>*> vecs;
    for (std::size_t w : words) {
      if (w >= embeddings.size() || embeddings[w].empty()) {
        ++r.missing_words;
        continue;
      }
      vecs.push_back(&embeddings[w]);
    }
    if (vecs.size() < 2) continue;
    double s = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      for (std::size_t j = i + 1; j < vecs.size(); ++j) {
        const auto& a = *vecs[i];
        const auto& b = *vecs[j];
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
          dot += a[k] * b[k];
          na += a[k] * a[k];
          nb += b[k] * b[k];
        }
        s += (na > 0.0 && nb > 0.0) ? std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0) : 0.0;
        ++pairs;
      }
    }
    total += s / static_cast<double>(pairs);
    ++scored;
  }
  r.mean = scored ? total / static_cast<double>(scored) : 0.0;
  if (r.missing_words > 0) r.warnings.push_back(std::to_string(r.missing_words) + " topic words have no embedding; skipped");
  return r;
}

}  // namespace topickg
