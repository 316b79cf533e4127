#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "topickg/checkpoint.hpp"
#include "topickg/error.hpp"
#include "topickg/optim.hpp"
#include "topickg/synthetic.hpp"
#include "topickg/trainer.hpp"

using namespace topickg;
using topickg::testing::expect_gradients_match;
namespace fs = std::filesystem;

namespace {

PlantedData small_planted(std::size_t docs = 50, std::uint64_t seed = 1) {
  PlantedSpec spec;
  spec.num_docs = docs;
  spec.groups = 2;
  spec.leaves_per_group = 2;
  spec.words_per_topic = 5;
  spec.noise_words = 5;
  spec.seed = seed;
  return make_planted(spec);
}

TrainConfig small_config(Mode mode = Mode::kTopicKG) {
  TrainConfig c;
  c.mode = mode;
  c.embedding_dim = 6;
  c.hidden_dim = 12;
  c.batch_size = 10;
  c.iterations = 20;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("topickg_trainer_" + name); }

double scalar_poisson(const Tensor& x, const Tensor& phi, const Tensor& theta) {
  double total = 0;
  for (std::size_t b = 0; b < x.rows(); ++b)
    for (std::size_t v = 0; v < x.cols(); ++v) {
      double rate = 0;
      for (std::size_t k = 0; k < theta.cols(); ++k) rate += theta.at(b, k) * phi.at(v, k);
      rate = std::max(rate, kRateFloor);
      total += x.at(b, v) * std::log(rate) - rate - std::lgamma(x.at(b, v) + 1);
    }
  return total;
}

}  // namespace

TEST(Elbo, TermsSumToTotal) {
  auto data = small_planted();
  for (Mode mode : {Mode::kTopicKG, Mode::kTopicKGA}) {
    TrainConfig cfg = small_config(mode);
    Rng init(3);
    ModelParams p = init_params(data.tree.layer_sizes(), cfg, init);
    GraphMatrices m = to_matrices(data.tree);
    Rng noise(4);
    ElboResult r = elbo(dense_counts(data.corpus, {0, 1, 2, 3}), p, m.normalized, m.S, m.C, cfg, noise);
    EXPECT_NEAR(r.terms.reconstruction + r.terms.graph - r.terms.kl, r.terms.total, 1e-9 * std::abs(r.terms.total));
    EXPECT_NEAR(r.objective.item(), r.terms.total, 1e-9 * std::abs(r.terms.total));
    EXPECT_DOUBLE_EQ(r.terms.graph, cfg.beta * r.terms.graph_ll);
  }
}

TEST(Elbo, ZeroBetaIsDocumentOnly) {
  auto data = small_planted();
  TrainConfig cfg = small_config();
  cfg.beta = 0;
  Rng init(3);
  ModelParams p = init_params(data.tree.layer_sizes(), cfg, init);
  GraphMatrices m = to_matrices(data.tree);
  Rng a(9);
  ElboResult r = elbo(dense_counts(data.corpus, {5, 6}), p, m.normalized, m.S, m.C, cfg, a);
  EXPECT_EQ(r.terms.graph, 0.0);
  EXPECT_DOUBLE_EQ(r.objective.item(), r.terms.reconstruction - r.terms.kl);
}

TEST(Elbo, DoublingBetaDoublesOnlyTheGraphTerm) {
  auto data = small_planted();
  TrainConfig cfg = small_config();
  cfg.beta = 7;
  Rng init(3);
  ModelParams p = init_params(data.tree.layer_sizes(), cfg, init);
  GraphMatrices m = to_matrices(data.tree);
  Tensor x = dense_counts(data.corpus, {0, 9});
  Rng a(5), b(5);
  ElboResult r1 = elbo(x, p, m.normalized, m.S, m.C, cfg, a);
  cfg.beta = 14;
  ElboResult r2 = elbo(x, p, m.normalized, m.S, m.C, cfg, b);
  EXPECT_EQ(r2.terms.graph, 2 * r1.terms.graph);
  EXPECT_EQ(r2.terms.reconstruction, r1.terms.reconstruction);
  EXPECT_EQ(r2.terms.kl, r1.terms.kl);
}

TEST(Elbo, SingleLayerZeroEmbeddingsComposition) {
  // V = 4 words, one topic layer of 2 topics, all embeddings zero: Phi is
  // uniform and every edge probability is one half.
  TopicTree tree;
  for (int i = 0; i < 4; ++i) tree.nodes.push_back({"w" + std::to_string(i), 0, ""});
  tree.nodes.push_back({"a", 1, ""});
  tree.nodes.push_back({"b", 1, ""});
  tree.edges = {{4, 0}, {4, 1}, {5, 2}, {5, 3}};
  tree.concepts = {{4, 0}};
  TrainConfig cfg = small_config();
  cfg.beta = 3;
  Rng init(2);
  ModelParams p = init_params(tree.layer_sizes(), cfg, init);
  for (auto& v : p.embeddings.mutable_values()) v = 0.0;
  GraphMatrices m = to_matrices(tree);
  Tensor x = Tensor::from({1, 4}, {2, 0, 1, 3});
  Rng noise(8);
  ElboResult r = elbo(x, p, m.normalized, m.S, m.C, cfg, noise);
  const Tensor& theta = r.state.theta[0];
  Tensor uniform = Tensor::full({4, 2}, 0.25);
  const double recon = scalar_poisson(x, uniform, theta);
  double kl = 0;
  for (std::size_t k = 0; k < 2; ++k)
    kl += kl_weibull_gamma(r.state.shape[0].at(0, k), r.state.scale[0].at(0, k), cfg.gamma_prior, cfg.rate_prior);
  const double graph = -(8.0 + 8.0) * std::log(2.0);
  EXPECT_NEAR(r.terms.reconstruction, recon, 1e-10);
  EXPECT_NEAR(r.terms.graph_ll, graph, 1e-10);
  EXPECT_NEAR(r.terms.kl, kl, 1e-10);
  EXPECT_NEAR(r.terms.total, recon + 3 * graph - kl, 1e-9);
}

TEST(Elbo, TwoLayerKlUsesUpperLayerRates) {
  auto data = small_planted();
  TrainConfig cfg = small_config();
  Rng init(6);
  ModelParams p = init_params(data.tree.layer_sizes(), cfg, init);
  GraphMatrices m = to_matrices(data.tree);
  ForwardGraph g = graph_forward(p, m.normalized);
  Tensor x = dense_counts(data.corpus, {0, 1, 2});
  Rng noise(1);
  ElboResult r = elbo(x, p, g, m.S, m.C, cfg, noise);
  double kl = 0;
  const auto& st = r.state;
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t k = 0; k < st.theta[0].cols(); ++k) {
      double alpha = 0;
      for (std::size_t j = 0; j < st.theta[1].cols(); ++j) alpha += st.theta[1].at(b, j) * g.phi[1].at(k, j);
      kl += kl_weibull_gamma(st.shape[0].at(b, k), st.scale[0].at(b, k), std::max(alpha, kRateFloor), cfg.rate_prior);
    }
    for (std::size_t j = 0; j < st.theta[1].cols(); ++j)
      kl += kl_weibull_gamma(st.shape[1].at(b, j), st.scale[1].at(b, j), cfg.gamma_prior, cfg.rate_prior);
  }
  EXPECT_NEAR(r.terms.kl, kl, 1e-9 * std::max(1.0, std::abs(kl)));
  EXPECT_NEAR(r.terms.reconstruction, scalar_poisson(x, g.phi[0], st.theta[0]), 1e-9 * std::abs(r.terms.reconstruction));
}

TEST(Elbo, GradientProbeMatchesFiniteDifferences) {
  auto data = small_planted(20);
  for (Mode mode : {Mode::kTopicKG, Mode::kTopicKGA}) {
    TrainConfig cfg = small_config(mode);
    Rng init(11);
    ModelParams p = init_params(data.tree.layer_sizes(), cfg, init);
    // Move away from the symmetric start so every path carries gradient.
    Rng jitter(12);
    for (auto& [name, t] : p.named())
      for (auto& v : t.mutable_values()) v += jitter.normal(0, 0.1);
    GraphMatrices m = to_matrices(data.tree);
    Tensor x = dense_counts(data.corpus, {0, 1, 2, 3});
    auto loss = [&] {
      Rng noise(42);
      return neg(elbo(x, p, m.normalized, m.S, m.C, cfg, noise).objective);
    };
    std::vector<Tensor> all;
    for (auto& [name, t] : p.named()) all.push_back(t);
    expect_gradients_match(loss, all, 1e-3, 1e-5, 10, 5);
    if (mode == Mode::kTopicKGA) expect_gradients_match(loss, {p.adaptive_embeddings}, 1e-3, 1e-5, 10, 7);
  }
}

TEST(Elbo, NonFiniteTermAbortsWithDecomposition) {
  auto data = small_planted();
  TrainConfig cfg = small_config();
  Rng init(1);
  ModelParams p = init_params(data.tree.layer_sizes(), cfg, init);
  p.embeddings.mutable_values()[0] = NAN;
  GraphMatrices m = to_matrices(data.tree);
  Rng noise(1);
  try {
    elbo(dense_counts(data.corpus, {0}), p, m.normalized, m.S, m.C, cfg, noise);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("reconstruction="), std::string::npos);
  }
}

namespace {
// sizes {2, 1}: nodes w0 w1 t; S and C blocks are both the word-topic block.
const std::vector<std::size_t> kSizes{2, 1};
Tensor revised(double w0t, double w1t) { return Tensor::from({3, 3}, {1, 0, w0t, 0, 1, w1t, w0t, w1t, 1}); }
}  // namespace

TEST(Anneal, ThresholdSemantics) {
  std::vector<Tensor> zero = {Tensor::zeros({2, 1})};
  auto up = anneal_update(revised(0.5, 0.39), kSizes, zero, zero, zero, zero, 0.4);
  EXPECT_EQ(up.S[0].at(0, 0), 1.0);
  EXPECT_EQ(up.S[0].at(1, 0), 0.0);
  EXPECT_EQ(up.C[0].at(0, 0), 1.0);
  EXPECT_EQ(up.C[0].at(1, 0), 0.0);
  EXPECT_EQ(up.event.added_s.size(), 1u);
  EXPECT_EQ(up.event.added_c.size(), 1u);
  EXPECT_EQ(up.event.added_c[0], EdgeRef(1, 0, 0));
}

TEST(Anneal, PriorEdgesRetained) {
  std::vector<Tensor> prior = {Tensor::from({2, 1}, {0, 1})};
  auto up = anneal_update(revised(0.1, 0.1), kSizes, prior, prior, prior, prior, 0.4);
  EXPECT_EQ(up.S[0].at(1, 0), 1.0);
  EXPECT_EQ(up.C[0].at(1, 0), 1.0);
  EXPECT_TRUE(up.event.removed_s.empty());
}

TEST(Anneal, RemovesPreviouslyAddedEdgeWhenItFades) {
  std::vector<Tensor> zero = {Tensor::zeros({2, 1})}, cur = {Tensor::from({2, 1}, {1, 0})};
  auto up = anneal_update(revised(0.2, 0.1), kSizes, zero, zero, cur, cur, 0.4);
  EXPECT_EQ(up.S[0].at(0, 0), 0.0);
  EXPECT_EQ(up.event.removed_s.size(), 1u);
  EXPECT_EQ(up.event.removed_c.size(), 1u);
}

TEST(Anneal, Idempotent) {
  Rng rng(4);
  const std::vector<std::size_t> sizes{6, 3, 2};
  Tensor a = rng.uniform_tensor({11, 11});
  std::vector<Tensor> pS = {Tensor::zeros({6, 3}), Tensor::zeros({3, 2})}, pC = {Tensor::zeros({6, 3}), Tensor::zeros({6, 2})};
  pS[0].mutable_values()[0] = 1;
  pC[1].mutable_values()[5] = 1;
  auto once = anneal_update(a, sizes, pS, pC, pS, pC, 0.5);
  auto twice = anneal_update(a, sizes, pS, pC, once.S, once.C, 0.5);
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t i = 0; i < once.S[l].size(); ++i) EXPECT_EQ(once.S[l].values()[i], twice.S[l].values()[i]);
    for (std::size_t i = 0; i < once.C[l].size(); ++i) EXPECT_EQ(once.C[l].values()[i], twice.C[l].values()[i]);
  }
  EXPECT_TRUE(twice.event.added_s.empty() && twice.event.added_c.empty());
  EXPECT_TRUE(twice.event.removed_s.empty() && twice.event.removed_c.empty());
}

TEST(Anneal, ShapeMismatch) {
  std::vector<Tensor> zero = {Tensor::zeros({2, 1})};
  EXPECT_THROW(anneal_update(Tensor::zeros({4, 4}), kSizes, zero, zero, zero, zero, 0.4), ShapeError);
}

TEST(Train, ZeroBetaTrajectoryIgnoresStructure) {
  auto data = small_planted(30);
  TrainConfig cfg = small_config();
  cfg.beta = 0;
  GraphMatrices m = to_matrices(data.tree);
  Rng fill(3);
  std::vector<Tensor> rS, rC;
  for (const auto& s : m.S) {
    Tensor t = Tensor::zeros(s.shape());
    for (auto& v : t.mutable_values()) v = fill.uniform() < 0.5;
    rS.push_back(t);
  }
  for (const auto& c : m.C) {
    Tensor t = Tensor::zeros(c.shape());
    for (auto& v : t.mutable_values()) v = fill.uniform() < 0.5;
    rC.push_back(t);
  }
  auto run = [&](const std::vector<Tensor>& S, const std::vector<Tensor>& C) {
    Rng init(cfg.seed);
    ModelParams p = init_params(data.tree.layer_sizes(), cfg, init);
    AdamW opt(p.named(), {cfg.learning_rate, cfg.weight_decay});
    BatchSampler sampler(data.corpus, cfg.batch_size, 2);
    Rng noise(3);
    for (int it = 0; it < 15; ++it) {
      Tape tape;
      Tape::Scope scope(tape);
      ElboResult r = elbo(sampler.next().counts, p, m.normalized, S, C, cfg, noise);
      tape.backward(neg(r.objective));
      opt.step();
    }
    return p;
  };
  ModelParams a = run(m.S, m.C), b = run(rS, rC);
  auto na = a.named(), nb = b.named();
  for (std::size_t i = 0; i < na.size(); ++i)
    for (std::size_t j = 0; j < na[i].second.size(); ++j)
      ASSERT_EQ(na[i].second.values()[j], nb[i].second.values()[j]) << na[i].first;
}

TEST(Train, NllDecreasesOnSmallCorpus) {
  auto data = small_planted(50);
  TrainConfig cfg = small_config();
  cfg.iterations = 500;
  TrainResult r = train(data.corpus, data.tree, cfg);
  ASSERT_EQ(r.report.records.size(), 500u);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    first += r.report.records[i].nll;
    last += r.report.records[450 + i].nll;
  }
  EXPECT_LT(last, first);
  for (std::size_t i = 1; i < r.report.records.size(); ++i)
    EXPECT_GT(r.report.records[i].iteration, r.report.records[i - 1].iteration);
}

TEST(Train, RevisionScheduleFollowsPeriod) {
  auto data = small_planted(30);
  TrainConfig cfg = small_config(Mode::kTopicKGA);
  cfg.iterations = 200;
  cfg.anneal_period = 50;
  TrainResult r = train(data.corpus, data.tree, cfg);
  ASSERT_EQ(r.report.revisions.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r.report.revisions[i].iteration, 50 * (i + 1));
  // Prior structure survives every revision.
  GraphMatrices m = to_matrices(data.tree);
  for (std::size_t l = 0; l < m.S.size(); ++l)
    for (std::size_t i = 0; i < m.S[l].size(); ++i) {
      if (m.S[l].values()[i] != 0) {
        EXPECT_EQ(r.S[l].values()[i], 1.0);
      }
    }
}

TEST(Train, TopicKGNeverRevises) {
  auto data = small_planted(30);
  TrainConfig cfg = small_config();
  cfg.anneal_period = 5;
  EXPECT_TRUE(train(data.corpus, data.tree, cfg).report.revisions.empty());
}

TEST(Train, IdenticalSeedsGiveIdenticalCheckpoints) {
  auto data = small_planted(30);
  TrainConfig cfg = small_config();
  cfg.iterations = 30;
  cfg.checkpoint_path = tmp("det_a.ckpt").string();
  train(data.corpus, data.tree, cfg);
  cfg.checkpoint_path = tmp("det_b.ckpt").string();
  train(data.corpus, data.tree, cfg);
  const std::string a = slurp(tmp("det_a.ckpt")), b = slurp(tmp("det_b.ckpt"));
  ASSERT_FALSE(a.empty());
  // The manifest records the checkpoint path, so compare from the arrays on.
  EXPECT_EQ(a.substr(a.find("arrays ")), b.substr(b.find("arrays ")));
  fs::remove(tmp("det_a.ckpt"));
  fs::remove(tmp("det_b.ckpt"));
}

TEST(Train, DivergenceKeepsLastCheckpoint) {
  auto data = small_planted(30);
  TrainConfig cfg = small_config();
  cfg.iterations = 20;
  cfg.checkpoint_every = 5;
  cfg.checkpoint_path = tmp("diverge.ckpt").string();
  auto poison = [](const IterationRecord& rec, const ModelParams& p) {
    if (rec.iteration == 7) {
      Tensor e = p.embeddings;
      e.mutable_values()[0] = NAN;
    }
  };
  EXPECT_THROW(train(data.corpus, data.tree, cfg, poison), Error);
  Checkpoint kept = read_checkpoint(cfg.checkpoint_path);

  cfg.iterations = 5;
  cfg.checkpoint_every = 0;
  cfg.checkpoint_path.clear();
  ModelParams clean = train(data.corpus, data.tree, cfg).params;
  ModelParams restored = params_from_checkpoint(kept);
  auto a = clean.named(), b = restored.named();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].second.size(); ++j)
      ASSERT_EQ(a[i].second.values()[j], b[i].second.values()[j]) << a[i].first;
  fs::remove(tmp("diverge.ckpt"));
}

TEST(Train, RejectsMismatchedTree) {
  auto data = small_planted(20);
  TrainConfig cfg = small_config();
  cfg.layers = {3, 3};
  EXPECT_THROW(train(data.corpus, data.tree, cfg), UsageError);
  PlantedData other = small_planted(20);
  other.corpus.vocab.push_back("extra");
  EXPECT_THROW(train(other.corpus, data.tree, small_config()), UsageError);
}

TEST(Train, ReportCsvHeaders) {
  auto data = small_planted(20);
  TrainConfig cfg = small_config(Mode::kTopicKGA);
  cfg.iterations = 10;
  cfg.anneal_period = 5;
  cfg.threshold = 0.01;
  TrainResult r = train(data.corpus, data.tree, cfg);
  r.report.write_csv(tmp("report.csv"));
  r.report.write_revisions_csv(tmp("rev.csv"));
  const std::string report = slurp(tmp("report.csv")), rev = slurp(tmp("rev.csv"));
  EXPECT_EQ(report.substr(0, report.find('\n')), "iteration,nll,graph_ll,kl,elbo,wall_ms");
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 11);
  EXPECT_EQ(rev.substr(0, rev.find('\n')), "iteration,kind,layer,row,col");
  fs::remove(tmp("report.csv"));
  fs::remove(tmp("rev.csv"));
}
