#include "topickg/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "topickg/distributions.hpp"
#include "topickg/error.hpp"

namespace topickg {

namespace fs = std::filesystem;

std::uint64_t Document::length() const {
  std::uint64_t n = 0;
  for (const auto& [w, c] : entries) n += c;
  return n;
}

std::vector<std::size_t> Corpus::train_ids() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < docs.size(); ++i)
    if (!is_test[i]) ids.push_back(i);
  return ids;
}

std::vector<std::size_t> Corpus::test_ids() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < docs.size(); ++i)
    if (is_test[i]) ids.push_back(i);
  return ids;
}

void Corpus::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& w : vocab)
    if (!seen.insert(w).second) throw Error("corpus: duplicate vocabulary entry '" + w + "'");
  if (!labels.empty() && labels.size() != docs.size()) throw Error("corpus: label count differs from doc count");
  if (is_test.size() != docs.size()) throw Error("corpus: split size differs from doc count");
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& e = docs[d].entries;
    if (e.empty()) throw Error("corpus: document " + std::to_string(d) + " is empty");
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i].first >= vocab.size()) throw Error("corpus: word id out of range in doc " + std::to_string(d));
      if (e[i].second == 0) throw Error("corpus: zero count stored in doc " + std::to_string(d));
      if (i > 0 && e[i].first <= e[i - 1].first) throw Error("corpus: unsorted entries in doc " + std::to_string(d));
    }
  }
}

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(std::move(tok));
  return out;
}

template <class T>
bool parse_int(const std::string& s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string> read_vocab(const fs::path& path) {
  auto lines = read_lines(path);
  std::vector<std::string> vocab;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto toks = split_ws(lines[i]);
    if (toks.size() != 1) throw ParseError(path.string(), i + 1, "expected one token per line");
    if (!seen.insert(toks[0]).second) throw ParseError(path.string(), i + 1, "duplicate token '" + toks[0] + "'");
    vocab.push_back(toks[0]);
  }
  return vocab;
}

Document to_document(const std::map<std::uint32_t, std::uint32_t>& counts) {
  Document d;
  d.entries.assign(counts.begin(), counts.end());
  return d;
}

bool looks_like_triplets(const std::vector<std::string>& lines) {
  for (const auto& l : lines) {
    auto toks = split_ws(l);
    if (toks.empty()) continue;
    if (toks.size() != 3) return false;
    for (const auto& t : toks) {
      long long v;
      if (!parse_int(t, v)) return false;
    }
    return true;
  }
  return false;
}

}  // namespace

Corpus corpus_from_tokens(const std::vector<std::vector<std::string>>& docs, std::vector<std::string> vocab,
                          LoadReport* report) {
  std::unordered_map<std::string, std::uint32_t> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], static_cast<std::uint32_t>(i));
  Corpus c;
  c.vocab = std::move(vocab);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::map<std::uint32_t, std::uint32_t> counts;
    for (const auto& tok : docs[d]) {
      auto it = index.find(tok);
      if (it != index.end()) ++counts[it->second];
    }
    if (counts.empty()) {
      if (report) {
        report->dropped_docs.push_back(d);
        report->warnings.push_back("document " + std::to_string(d) + " has no in-vocabulary tokens; dropped");
      }
      continue;
    }
    c.docs.push_back(to_document(counts));
  }
  c.is_test.assign(c.docs.size(), false);
  return c;
}

Corpus load_corpus(const fs::path& docs_path, const LoadOptions& options, LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  const auto lines = read_lines(docs_path);
  DocFormat format = options.format;
  if (format == DocFormat::kAuto) format = looks_like_triplets(lines) ? DocFormat::kTriplets : DocFormat::kText;

  Corpus corpus;
  std::vector<std::size_t> kept_sources;  // source doc index of each kept doc
  std::size_t source_docs = 0;

  if (format == DocFormat::kTriplets) {
    if (!options.vocab_path) throw UsageError("triplet input requires a vocabulary file");
    corpus.vocab = read_vocab(*options.vocab_path);
    std::map<std::size_t, std::map<std::uint32_t, std::uint32_t>> rows;
    std::size_t max_doc = 0;
    bool any = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      auto toks = split_ws(lines[i]);
      if (toks.empty()) continue;
      std::size_t doc;
      std::uint32_t word, count;
      if (toks.size() != 3 || !parse_int(toks[0], doc) || !parse_int(toks[1], word) || !parse_int(toks[2], count))
        throw ParseError(docs_path.string(), i + 1, "expected 'doc_id word_id count' with non-negative integers");
      if (word >= corpus.vocab.size())
        throw ParseError(docs_path.string(), i + 1, "word id " + std::to_string(word) + " >= vocabulary size");
      if (count > 0) rows[doc][word] += count;
      max_doc = std::max(max_doc, doc);
      any = true;
    }
    source_docs = any ? max_doc + 1 : 0;
    for (std::size_t d = 0; d < source_docs; ++d) {
      auto it = rows.find(d);
      if (it == rows.end() || it->second.empty()) {
        rep.dropped_docs.push_back(d);
        rep.warnings.push_back("document " + std::to_string(d) + " has no counts; dropped");
        continue;
      }
      corpus.docs.push_back(to_document(it->second));
      kept_sources.push_back(d);
    }
  } else {
    std::vector<std::vector<std::string>> tokenized;
    tokenized.reserve(lines.size());
    for (const auto& l : lines) tokenized.push_back(split_ws(l));
    source_docs = tokenized.size();
    std::vector<std::string> vocab;
    if (options.vocab_path) {
      vocab = read_vocab(*options.vocab_path);
    } else {
      std::unordered_set<std::string> stop;
      if (options.stopwords_path)
        for (const auto& l : read_lines(*options.stopwords_path))
          for (auto& t : split_ws(l)) stop.insert(t);
      std::unordered_map<std::string, std::size_t> freq;
      for (const auto& doc : tokenized)
        for (const auto& t : doc)
          if (!stop.count(t)) ++freq[t];
      std::vector<std::pair<std::string, std::size_t>> kept;
      for (auto& [w, n] : freq)
        if (n >= options.min_count) kept.emplace_back(w, n);
      std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
      });
      if (options.max_vocab > 0 && kept.size() > options.max_vocab) kept.resize(options.max_vocab);
      for (auto& [w, n] : kept) vocab.push_back(w);
    }
    LoadReport tok_rep;
    corpus = corpus_from_tokens(tokenized, std::move(vocab), &tok_rep);
    std::set<std::size_t> dropped(tok_rep.dropped_docs.begin(), tok_rep.dropped_docs.end());
    for (std::size_t d = 0; d < source_docs; ++d)
      if (!dropped.count(d)) kept_sources.push_back(d);
    rep.dropped_docs.insert(rep.dropped_docs.end(), tok_rep.dropped_docs.begin(), tok_rep.dropped_docs.end());
    rep.warnings.insert(rep.warnings.end(), tok_rep.warnings.begin(), tok_rep.warnings.end());
  }

  if (options.labels_path) {
    const auto label_lines = read_lines(*options.labels_path);
    std::vector<int> all;
    for (std::size_t i = 0; i < label_lines.size(); ++i) {
      auto toks = split_ws(label_lines[i]);
      if (toks.empty() && i + 1 == label_lines.size()) break;
      int v;
      if (toks.size() != 1 || !parse_int(toks[0], v) || v < 0)
        throw ParseError(options.labels_path->string(), i + 1, "expected one non-negative integer label");
      all.push_back(v);
    }
    if (all.size() != source_docs)
      throw ParseError(options.labels_path->string(), all.size() + 1,
                       "label count " + std::to_string(all.size()) + " does not match document count " +
                           std::to_string(source_docs));
    for (std::size_t s : kept_sources) corpus.labels.push_back(all[s]);
  }

  corpus.is_test.assign(corpus.docs.size(), false);
  if (options.split_path) {
    const auto split_lines = read_lines(*options.split_path);
    if (split_lines.size() != source_docs)
      throw ParseError(options.split_path->string(), split_lines.size() + 1, "split count does not match documents");
    std::vector<bool> all(source_docs);
    for (std::size_t i = 0; i < split_lines.size(); ++i) {
      if (split_lines[i] == "train") all[i] = false;
      else if (split_lines[i] == "test") all[i] = true;
      else throw ParseError(options.split_path->string(), i + 1, "expected 'train' or 'test'");
    }
    for (std::size_t k = 0; k < kept_sources.size(); ++k) corpus.is_test[k] = all[kept_sources[k]];
  }
  corpus.validate();
  return corpus;
}

void save_corpus(const Corpus& corpus, const fs::path& stem) {
  auto open = [&](const std::string& ext) {
    fs::path p = stem;
    p += ext;
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
  };
  {
    auto out = open(".vocab");
    for (const auto& w : corpus.vocab) out << w << '\n';
  }
  {
    auto out = open(".triplets");
    for (std::size_t d = 0; d < corpus.docs.size(); ++d)
      for (const auto& [w, c] : corpus.docs[d].entries) out << d << ' ' << w << ' ' << c << '\n';
  }
  {
    auto out = open(".split");
    for (bool t : corpus.is_test) out << (t ? "test" : "train") << '\n';
  }
  if (corpus.has_labels()) {
    auto out = open(".labels");
    for (int l : corpus.labels) out << l << '\n';
  }
}

Corpus load_saved_corpus(const fs::path& stem) {
  auto with = [&](const std::string& ext) {
    fs::path p = stem;
    p += ext;
    return p;
  };
  LoadOptions opt;
  opt.format = DocFormat::kTriplets;
  opt.vocab_path = with(".vocab");
  opt.split_path = with(".split");
  if (fs::exists(with(".labels"))) opt.labels_path = with(".labels");
  return load_corpus(with(".triplets"), opt);
}

void assign_random_split(Corpus& corpus, double test_fraction, std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction >= 1.0) throw UsageError("test fraction must lie in [0, 1)");
  Rng rng(seed);
  auto order = rng.permutation(corpus.num_docs());
  const auto n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(corpus.num_docs()));
  corpus.is_test.assign(corpus.num_docs(), false);
  for (std::size_t i = 0; i < n_test; ++i) corpus.is_test[order[i]] = true;
}

Tensor dense_counts(const Corpus& corpus, const std::vector<std::size_t>& ids) {
  const std::size_t V = corpus.vocab_size();
  std::vector<double> v(ids.size() * V, 0.0);
  for (std::size_t r = 0; r < ids.size(); ++r)
    for (const auto& [w, c] : corpus.docs.at(ids[r]).entries) v[r * V + w] = c;
  return Tensor::from({ids.size(), V}, std::move(v));
}

std::vector<Batch> batches(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw UsageError("batch size must be >= 1");
  auto train = corpus.train_ids();
  Rng rng(seed);
  auto perm = rng.permutation(train.size());
  std::vector<Batch> out;
  for (std::size_t start = 0; start < perm.size(); start += batch_size) {
    Batch b;
    for (std::size_t i = start; i < std::min(start + batch_size, perm.size()); ++i) b.doc_ids.push_back(train[perm[i]]);
    b.counts = dense_counts(corpus, b.doc_ids);
    out.push_back(std::move(b));
  }
  return out;
}

BatchSampler::BatchSampler(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed)
    : corpus_(&corpus), batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) throw UsageError("batch size must be >= 1");
  if (corpus.train_ids().empty()) throw UsageError("corpus has no training documents");
}

Batch BatchSampler::next() {
  if (cursor_ >= order_.size()) {
    auto train = corpus_->train_ids();
    Rng rng(seed_ + 0x9E3779B97F4A7C15ULL * (epoch_ + 1));
    auto perm = rng.permutation(train.size());
    order_.clear();
    for (std::size_t p : perm) order_.push_back(train[p]);
    cursor_ = 0;
    ++epoch_;
  }
  Batch b;
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  b.doc_ids.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_), order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  b.counts = dense_counts(*corpus_, b.doc_ids);
  return b;
}

}  // namespace topickg
