// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "kl_oracle.hpp"
#include "topickg/checkpoint.hpp"
#include "topickg/classify.hpp"
#include "topickg/distributions.hpp"
#include "topickg/evaluate.hpp"
#include "topickg/metrics.hpp"
#include "topickg/synthetic.hpp"
#include "topickg/trainer.hpp"

using namespace topickg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
  failures += !o.pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Planted corpus: 2 groups x 3 leaves, 10 words per leaf.
PlantedSpec planted_spec() {
  PlantedSpec s;
  s.num_docs = 500;
  s.groups = 2;
  s.leaves_per_group = 3;
  s.words_per_topic = 10;
  s.seed = 7;
  return s;
}

TrainConfig desk_config() {
  TrainConfig c;
  c.embedding_dim = 16;
  c.hidden_dim = 32;
  c.batch_size = 50;
  c.learning_rate = 0.01;
  c.iterations = 2000;
  return c;
}

double mean_nll(const TrainReport& r, std::size_t begin, std::size_t end) {
  double s = 0;
  for (std::size_t i = begin; i < end; ++i) s += r.records[i].nll;
  return s / static_cast<double>(end - begin);
}

// Toy model: V = 30, layers [5, 3, 1].
TopicTree toy_tree() {
  TopicTree t;
  for (int i = 0; i < 30; ++i) t.nodes.push_back({"w" + std::to_string(i), 0, ""});
  for (int k = 0; k < 5; ++k) t.nodes.push_back({"a" + std::to_string(k), 1, ""});
  for (int k = 0; k < 3; ++k) t.nodes.push_back({"b" + std::to_string(k), 2, ""});
  t.nodes.push_back({"root", 3, ""});
  for (std::size_t w = 0; w < 30; ++w) t.edges.emplace_back(30 + w / 6, w);
  for (std::size_t k = 0; k < 5; ++k) t.edges.emplace_back(35 + std::min<std::size_t>(k / 2, 2), 30 + k);
  for (std::size_t k = 0; k < 3; ++k) t.edges.emplace_back(38, 35 + k);
  for (std::size_t k = 0; k < 5; ++k) t.concepts.emplace_back(30 + k, 6 * k);
  return t;
}

Outcome kl_oracle() {
  Rng rng(2024);
  double worst = 0, max_tail = 0;
  for (int i = 0; i < 100; ++i) {
    double v[4];
    for (double& x : v) x = 0.5 + 4.5 * rng.uniform();
    double tail = 0;
    worst = std::max(worst, std::abs(kl_weibull_gamma(v[0], v[1], v[2], v[3]) -
                                     testing::kl_quadrature(v[0], v[1], v[2], v[3], &tail)));
    max_tail = std::max(max_tail, tail);
  }
  const double at_one = kl_weibull_gamma(1, 1, 1, 1);
  return {worst <= 1e-4 && max_tail < 1e-12 && std::abs(at_one) < 1e-14,
          fmt("max |analytic - quadrature| = %.2e over 100 tuples, KL(1,1,1,1) = %.1e", worst, at_one)};
}

Outcome gradient_suite() {
  TopicTree tree = toy_tree();
  TrainConfig cfg;
  cfg.mode = Mode::kTopicKGA;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 16;
  Rng init(5);
  ModelParams p = init_params(tree.layer_sizes(), cfg, init);
  Rng jitter(6);
  for (auto& [name, t] : p.named())
    for (auto& v : t.mutable_values()) v += jitter.normal(0, 0.1);
  GraphMatrices m = to_matrices(tree);
  Rng docs(7);
  Tensor x = Tensor::zeros({4, 30});
  for (auto& v : x.mutable_values()) v = docs.uniform() < 0.3 ? std::floor(1 + 3 * docs.uniform()) : 0.0;

  auto loss = [&] {
    Rng noise(99);
    return neg(elbo(x, p, m.normalized, m.S, m.C, cfg, noise).objective);
  };
  std::vector<Tensor> params;
  for (auto& [name, t] : p.named()) {
    t.zero_grad();
    params.push_back(t);
  }
  {
    Tape tape;
    Tape::Scope scope(tape);
    tape.backward(loss());
  }
  const double h = 1e-5;
  double worst = 0;
  std::size_t checked = 0, bad = 0;
  std::string worst_name;
  auto named = p.named();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto analytic = params[i].grad();
    auto v = params[i].mutable_values();
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double orig = v[j];
      v[j] = orig + h;
      const double up = loss().item();
      v[j] = orig - h;
      const double down = loss().item();
      v[j] = orig;
      const double numeric = (up - down) / (2 * h);
      const double rel = std::abs(analytic[j] - numeric) / std::max({std::abs(analytic[j]), std::abs(numeric), 1e-3});
      ++checked;
      bad += rel > 1e-3;
      if (rel > worst) {
        worst = rel;
        worst_name = named[i].first + "[" + std::to_string(j) + "]";
      }
    }
  }
  return {bad == 0, fmt("%zu entries, %zu above 1e-3, worst relative error %.2e at %s", checked, bad, worst,
                        worst_name.c_str())};
}

Outcome simplex_checks() {
  PlantedData data = make_planted(planted_spec());
  TrainConfig cfg = desk_config();
  cfg.mode = Mode::kTopicKGA;
  cfg.iterations = 50;
  TrainResult r = train(data.corpus, data.tree, cfg);
  ForwardGraph g = graph_forward(r.params, to_matrices(data.tree).normalized);
  double phi_err = 0, ada_err = 0;
  for (const auto& phi : g.phi)
    for (std::size_t k = 0; k < phi.cols(); ++k) {
      double s = 0;
      for (std::size_t i = 0; i < phi.rows(); ++i) s += phi.at(i, k);
      phi_err = std::max(phi_err, std::abs(s - 1));
    }
  for (std::size_t i = 0; i < g.adaptive.rows(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < g.adaptive.cols(); ++j) s += g.adaptive.at(i, j);
    ada_err = std::max(ada_err, std::abs(s - 1));
  }
  // KS with 1e5 draws per shape, family-wise alpha = 0.01 over three shapes
  // (Bonferroni: alpha / 3 each, asymptotic critical sqrt(-ln(alpha / 6) / 2)).
  Rng rng(17);
  const std::size_t n = 100000;
  const double crit = std::sqrt(-std::log(0.01 / 6) / 2) / std::sqrt(static_cast<double>(n));
  double worst_d = 0;
  for (auto [k, lam] : {std::pair{0.5, 1.0}, std::pair{1.5, 2.0}, std::pair{4.0, 0.5}}) {
    std::vector<double> v(n);
    for (auto& x : v) x = weibull_sample(k, lam, rng.uniform());
    std::sort(v.begin(), v.end());
    double d = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = weibull_cdf(v[i], k, lam);
      d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    worst_d = std::max(worst_d, d);
  }
  return {phi_err <= 1e-9 && ada_err <= 1e-9 && worst_d < crit,
          fmt("max |Phi col sum - 1| = %.1e, max |A_ada row sum - 1| = %.1e, max KS D = %.5f (critical %.5f, family-wise alpha 0.01)", phi_err,
              ada_err, worst_d, crit)};
}

// Shared between criteria 4 and 6.
TrainReport topickg_report;

Outcome planted_recovery() {
  PlantedData data = make_planted(planted_spec());
  const Tensor norm = to_matrices(data.tree).normalized;
  // Oracle: NPMI of the planted leaf word lists themselves.
  DocFrequencies freq(data.corpus);
  const double oracle = topic_coherence_npmi(data.topic_words, freq).mean;
  EvalOptions eo;
  eo.classify = false;
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double tc[2];
    for (int b = 0; b < 2; ++b) {
      TrainConfig cfg = desk_config();
      cfg.seed = seed;
      cfg.beta = b == 0 ? 50.0 : 0.0;
      TrainResult r = train(data.corpus, data.tree, cfg);
      if (seed == 1 && b == 0) topickg_report = r.report;
      tc[b] = evaluate(r.params, norm, data.corpus, cfg, eo).layers[0].tc;
    }
    wins += tc[0] > tc[1];
    detail += fmt(" s%d:%.3f/%.3f", static_cast<int>(seed), tc[0], tc[1]);
  }
  return {wins >= 4, fmt("beta=50 beats beta=0 on leaf-topic NPMI in %d/5 seeds (planted oracle %.3f;", wins, oracle) +
                         detail + ")"};
}

TrainReport topickga_report;

Outcome adaptive_recovery() {
  PlantedSpec spec = planted_spec();
  spec.free_topics = 1;
  PlantedData data = make_planted(spec);
  const std::size_t free_topic = data.free_topic_index.at(0);
  const auto& free_words = data.topic_words.back();
  int hits = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig cfg = desk_config();
    cfg.mode = Mode::kTopicKGA;
    cfg.seed = seed;
    cfg.anneal_period = 200;
    cfg.threshold = 0.025;
    double peak = 0;
    const std::size_t V = data.corpus.vocab_size(), N = data.tree.num_nodes(), col = V + free_topic;
    TrainResult r = train(data.corpus, data.tree, cfg, [&](const IterationRecord& rec, const ModelParams& p) {
      if (rec.iteration % cfg.anneal_period != 0) return;
      Tensor a = adaptive_adjacency(p.adaptive_embeddings);
      for (auto w : free_words) peak = std::max(peak, a.values()[w * N + col]);
    });
    if (seed == 1) topickga_report = r.report;
    std::size_t added = 0;
    for (std::size_t e = 0; e < std::min<std::size_t>(10, r.report.revisions.size()); ++e)
      for (const auto& [layer, word, topic] : r.report.revisions[e].added_c)
        if (layer == 1 && topic == free_topic && std::find(free_words.begin(), free_words.end(), word) != free_words.end())
          ++added;
    hits += added > 0;
    detail += fmt(" s%d:%zu edges, peak %.4f", static_cast<int>(seed), added, peak);
  }
  return {hits >= 3, fmt("free topic gained a planted C-edge within 10 anneal events in %d/5 seeds (s = 0.025;", hits) +
                         detail + ")"};
}

Outcome training_sanity() {
  if (topickg_report.records.size() < 200 || topickga_report.records.size() < 200)
    return {false, "reports from criteria 4/5 unavailable"};
  auto check = [](const TrainReport& r) {
    const std::size_t n = r.records.size();
    return std::pair{mean_nll(r, 0, 100), mean_nll(r, n - 100, n)};
  };
  auto [g0, g1] = check(topickg_report);
  auto [a0, a1] = check(topickga_report);
  return {g1 < g0 && a1 < a0,
          fmt("TopicKG NLL %.2f -> %.2f, TopicKGA NLL %.2f -> %.2f (first vs last 100 iterations)", g0, g1, a0, a1)};
}

Outcome classification_floor() {
  PlantedSpec spec;
  spec.num_docs = 400;
  spec.groups = 2;
  spec.leaves_per_group = 4;
  spec.words_per_topic = 10;
  spec.num_classes = 4;
  spec.test_fraction = 0.25;
  spec.seed = 11;
  PlantedData data = make_planted(spec);
  TrainConfig cfg = desk_config();
  cfg.iterations = 1000;
  TrainResult r = train(data.corpus, data.tree, cfg);
  EvalMetrics m = evaluate(r.params, to_matrices(data.tree).normalized, data.corpus, cfg);
  // Majority baseline: the most frequent training class predicted everywhere.
  std::map<int, int> counts;
  for (auto i : data.corpus.train_ids()) ++counts[data.corpus.labels[i]];
  const int majority =
      std::max_element(counts.begin(), counts.end(), [](auto a, auto b) { return a.second < b.second; })->first;
  std::vector<int> truth, base;
  for (auto i : data.corpus.test_ids()) {
    truth.push_back(data.corpus.labels[i]);
    base.push_back(majority);
  }
  const double floor = micro_f1(truth, base);
  return {m.has_classification && m.micro_f1 >= floor + 0.25,
          fmt("micro F1 %.3f vs majority %.3f on %zu test docs (macro F1 %.3f)", m.micro_f1, floor, truth.size(),
              m.macro_f1)};
}

Outcome determinism() {
  PlantedSpec spec = planted_spec();
  spec.num_docs = 200;
  PlantedData data = make_planted(spec);
  const fs::path dir = fs::temp_directory_path() / "topickg_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  TrainConfig cfg = desk_config();
  cfg.iterations = 300;
  cfg.checkpoint_path = (dir / "model.ckpt").string();
  std::string ckpt[2], csv[2];
  for (int run = 0; run < 2; ++run) {
    TrainResult r = train(data.corpus, data.tree, cfg);
    ckpt[run] = slurp(cfg.checkpoint_path);
    Checkpoint loaded = read_checkpoint(cfg.checkpoint_path);
    EvalMetrics m = evaluate(params_from_checkpoint(loaded), to_matrices(data.tree).normalized, data.corpus, cfg);
    m.write_csv(dir / ("metrics" + std::to_string(run) + ".csv"));
    csv[run] = slurp(dir / ("metrics" + std::to_string(run) + ".csv"));
  }
  fs::remove_all(dir);
  const bool same = !ckpt[0].empty() && ckpt[0] == ckpt[1] && !csv[0].empty() && csv[0] == csv[1];
  return {same, fmt("checkpoints %zu bytes %s, metric CSVs %s", ckpt[0].size(), ckpt[0] == ckpt[1] ? "identical" : "differ",
                    csv[0] == csv[1] ? "identical" : "differ")};
}

Outcome metric_units() {
  Corpus c = corpus_from_tokens({{"a", "b"}, {"a", "b"}, {"c"}}, {"a", "b", "c"});
  c.is_test.assign(c.num_docs(), false);
  const double n = npmi(DocFrequencies(c), 0, 1);
  const double td = topic_diversity({{0, 1, 2}, {0, 1, 2}});
  const double we = word_embedding_coherence({{0, 1, 2}}, {{0.3, -1.2, 2.0}, {0.3, -1.2, 2.0}, {0.3, -1.2, 2.0}}).mean;
  return {n == 1.0 && td == 0.5 && we == 1.0, fmt("NPMI %.17g, TD %.17g, WE %.17g", n, td, we)};
}

}  // namespace

int main() {
  report(1, "KL oracle", kl_oracle);
  report(2, "gradient suite", gradient_suite);
  report(3, "simplex and normalization", simplex_checks);
  report(4, "planted-structure recovery", planted_recovery);
  report(5, "adaptive recovery", adaptive_recovery);
  report(6, "training sanity", training_sanity);
  report(7, "classification floor", classification_floor);
  report(8, "determinism", determinism);
  report(9, "metric unit values", metric_units);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
