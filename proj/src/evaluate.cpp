#include "topickg/evaluate.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "topickg/error.hpp"
#include "topickg/trainer.hpp"

namespace topickg {

std::string EvalMetrics::csv() const {
  std::ostringstream os;
  os << std::setprecision(17) << "metric,layer,value\n";
  for (const auto& l : layers) {
    os << "tc," << l.layer << ',' << l.tc << '\n';
    os << "td," << l.layer << ',' << l.td << '\n';
    os << "we," << l.layer << ',' << l.we << '\n';
  }
  if (has_classification) {
    os << "micro_f1,," << micro_f1 << '\n';
    os << "macro_f1,," << macro_f1 << '\n';
  }
  return os.str();
}

void EvalMetrics::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << csv();
}

EvalMetrics evaluate(const ModelParams& params, const Tensor& normalized_adjacency, const Corpus& corpus,
                     const TrainConfig& config, const EvalOptions& options) {
  EvalMetrics m;
  const ForwardGraph graph = graph_forward(params, normalized_adjacency);
  const std::size_t V = corpus.vocab_size();
  const DocFrequencies freq(corpus);
  const EmbeddingTable learned = embeddings_from_matrix(graph.embeddings, V);
  const EmbeddingTable& table = options.embeddings ? *options.embeddings : learned;
  for (std::size_t l = 1; l <= params.num_layers(); ++l) {
    LayerMetrics lm;
    lm.layer = l;
    const auto top_c = top_word_lists(graph.phi, l, std::min(options.coherence_words, V));
    const auto top_d = top_word_lists(graph.phi, l, std::min(options.diversity_words, V));
    auto tc = topic_coherence_npmi(top_c, freq);
    auto we = word_embedding_coherence(top_c, table);
    lm.tc = tc.mean;
    lm.td = topic_diversity(top_d);
    lm.we = we.mean;
    for (auto& w : tc.warnings) m.warnings.push_back("layer " + std::to_string(l) + ": " + w);
    for (auto& w : we.warnings) m.warnings.push_back("layer " + std::to_string(l) + ": " + w);
    m.layers.push_back(lm);
  }
  if (options.classify && corpus.has_labels()) {
    const auto train = corpus.train_ids(), test = corpus.test_ids();
    if (!train.empty() && !test.empty()) {
      const Tensor theta_train = infer_theta(params, normalized_adjacency, corpus, train, config)[0];
      const Tensor theta_test = infer_theta(params, normalized_adjacency, corpus, test, config)[0];
      std::vector<int> ytr, yte;
      for (auto i : train) ytr.push_back(corpus.labels[i]);
      for (auto i : test) yte.push_back(corpus.labels[i]);
      auto r = classify_theta(theta_train, ytr, theta_test, yte, options.logreg);
      m.has_classification = true;
      m.micro_f1 = r.micro_f1;
      m.macro_f1 = r.macro_f1;
    }
  }
  return m;
}

}  // namespace topickg
