#include "topickg/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>

#include "topickg/distributions.hpp"
#include "topickg/error.hpp"

namespace topickg {

namespace {

std::string label(const char* fmt, std::size_t a, std::size_t b = 0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

}  // namespace

PlantedData make_planted(const PlantedSpec& spec) {
  if (spec.groups == 0 || spec.leaves_per_group == 0 || spec.words_per_topic == 0 || spec.num_docs == 0)
    throw UsageError("planted corpus: groups, leaves, words per topic and documents must be positive");
  if (spec.noise < 0.0 || spec.noise > 1.0 || spec.dirichlet <= 0.0 || spec.doc_length <= 0.0)
    throw UsageError("planted corpus: invalid noise, concentration or document length");
  if (spec.num_classes == 1) throw UsageError("planted corpus: need at least two classes");

  const std::size_t planted = spec.groups * spec.leaves_per_group;
  const std::size_t leaves = planted + spec.free_topics;
  const std::size_t W = spec.words_per_topic;
  const std::size_t V = leaves * W + spec.noise_words;

  PlantedData out;
  std::vector<std::string> vocab;
  for (std::size_t t = 0; t < leaves; ++t) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < W; ++i) {
      ids.push_back(vocab.size());
      vocab.push_back(t < planted ? label("t%zu_w%zu", t, i) : label("free%zu_w%zu", t - planted, i));
    }
    out.topic_words.push_back(std::move(ids));
  }
  for (std::size_t i = 0; i < spec.noise_words; ++i) vocab.push_back(label("noise%zu", i));

  TopicTree& tree = out.tree;
  for (const auto& w : vocab) tree.nodes.push_back({w, 0, ""});
  for (std::size_t t = 0; t < leaves; ++t)
    tree.nodes.push_back({t < planted ? label("topic%zu", t) : label("free%zu", t - planted), 1, ""});
  for (std::size_t g = 0; g < spec.groups; ++g) tree.nodes.push_back({label("group%zu", g), 2, ""});
  const std::size_t leaf0 = V, group0 = V + leaves;
  for (std::size_t t = 0; t < leaves; ++t) {
    const std::size_t g = t < planted ? t / spec.leaves_per_group : 0;
    tree.edges.emplace_back(group0 + g, leaf0 + t);
    if (t >= planted) {
      out.free_topic_index.push_back(t);
      continue;
    }
    for (std::size_t w : out.topic_words[t]) tree.edges.emplace_back(leaf0 + t, w);
    for (std::size_t i = 0; i < std::min(spec.concepts_per_topic, W); ++i)
      tree.concepts.emplace_back(leaf0 + t, out.topic_words[t][i]);
  }
  tree.validate();

  Rng rng(spec.seed);
  std::poisson_distribution<int> length(spec.doc_length);
  Corpus& c = out.corpus;
  c.vocab = vocab;
  for (std::size_t d = 0; d < spec.num_docs; ++d) {
    int cls = -1;
    if (spec.num_classes > 0) cls = static_cast<int>(rng.next() % spec.num_classes);
    std::vector<double> group_w(spec.groups);
    for (auto& g : group_w) g = rng.gamma(spec.group_dirichlet, 1.0);
    std::vector<double> theta(leaves);
    double total = 0.0;
    for (std::size_t t = 0; t < leaves; ++t) {
      double a = spec.dirichlet;
      if (cls >= 0 && t < planted && t % spec.num_classes == static_cast<std::size_t>(cls)) a += spec.class_boost;
      const std::size_t g = t < planted ? t / spec.leaves_per_group : 0;
      theta[t] = rng.gamma(a, 1.0) * group_w[g];
      total += theta[t];
    }
    if (total <= 0.0) theta.assign(leaves, 1.0);
    std::discrete_distribution<std::size_t> pick_topic(theta.begin(), theta.end());

    const std::size_t n = std::max(1, length(rng.engine()));
    std::map<std::uint32_t, std::uint32_t> counts;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t w;
      if (rng.uniform() < spec.noise) {
        w = rng.next() % V;
      } else {
        const std::size_t t = pick_topic(rng.engine());
        w = out.topic_words[t][rng.next() % W];
      }
      ++counts[static_cast<std::uint32_t>(w)];
    }
    Document doc;
    doc.entries.assign(counts.begin(), counts.end());
    c.docs.push_back(std::move(doc));
    if (cls >= 0) c.labels.push_back(cls);
  }
  c.is_test.assign(c.docs.size(), false);
  if (spec.test_fraction > 0.0) assign_random_split(c, spec.test_fraction, spec.seed + 1);
  c.validate();
  return out;
}

}  // namespace topickg
