#include "topickg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "topickg/checkpoint.hpp"
#include "topickg/error.hpp"
#include "topickg/optim.hpp"

namespace topickg {

ForwardGraph graph_forward(const ModelParams& params, const Tensor& normalized_adjacency) {
  ForwardGraph g;
  g.adjacency = normalized_adjacency;
  if (params.adaptive()) {
    g.adaptive = adaptive_adjacency(params.adaptive_embeddings);
    g.adjacency = revise_adjacency(normalized_adjacency, g.adaptive);
  }
  g.embeddings = gcn_forward(g.adjacency, params.embeddings, params.gcn);
  g.phi = compute_phi(g.embeddings, params.layer_sizes);
  return g;
}

namespace {

std::string dump(const ElboTerms& t) {
  std::ostringstream os;
  os << std::setprecision(10) << "reconstruction=" << t.reconstruction << " graph_ll=" << t.graph_ll
     << " kl=" << t.kl << " total=" << t.total;
  return os.str();
}

}  // namespace

ElboResult elbo(const Tensor& counts, const ModelParams& params, const ForwardGraph& graph,
                const std::vector<Tensor>& S, const std::vector<Tensor>& C, const TrainConfig& config, Rng& rng) {
  const std::size_t L = params.num_layers();
  ElboResult r;
  r.state = encode(counts, graph.phi, params, ClampBounds::from(config), rng);

  Tensor recon = poisson_log_lik(counts, graph.phi[0], r.state.theta[0]);

  Tensor kl = Tensor::scalar(0.0);
  const Tensor rate = Tensor::scalar(params.rate);
  for (std::size_t l = 1; l <= L; ++l) {
    Tensor alpha = l == L ? Tensor::from({1, params.gamma.size()}, params.gamma)
                          : clamp(matmul(r.state.theta[l], transpose(graph.phi[l])), kRateFloor, INFINITY);
    kl = add(kl, sum(kl_weibull_gamma(r.state.shape[l - 1], r.state.scale[l - 1], alpha, rate)));
  }

  Tensor graph_ll = edge_log_probs(graph.embeddings, params.edge_w, S, C, params.layer_sizes);

  Tensor objective = sub(recon, kl);
  if (config.beta != 0.0) objective = add(objective, scale(graph_ll, config.beta));

  r.terms.reconstruction = recon.item();
  r.terms.graph_ll = graph_ll.item();
  r.terms.graph = config.beta * r.terms.graph_ll;
  r.terms.kl = kl.item();
  r.terms.total = r.terms.reconstruction + r.terms.graph - r.terms.kl;
  r.objective = objective;
  if (!std::isfinite(r.terms.reconstruction) || !std::isfinite(r.terms.graph_ll) || !std::isfinite(r.terms.kl) ||
      !std::isfinite(objective.item()))
    throw NumericError("non-finite ELBO: " + dump(r.terms));
  return r;
}

ElboResult elbo(const Tensor& counts, const ModelParams& params, const Tensor& normalized_adjacency,
                const std::vector<Tensor>& S, const std::vector<Tensor>& C, const TrainConfig& config, Rng& rng) {
  return elbo(counts, params, graph_forward(params, normalized_adjacency), S, C, config, rng);
}

StructureUpdate anneal_update(const Tensor& revised, const std::vector<std::size_t>& sizes,
                              const std::vector<Tensor>& prior_S, const std::vector<Tensor>& prior_C,
                              const std::vector<Tensor>& current_S, const std::vector<Tensor>& current_C,
                              double threshold) {
  const std::size_t L = sizes.size() - 1, V = sizes[0], N = revised.rows();
  std::vector<std::size_t> off(L + 1, 0);
  for (std::size_t l = 1; l <= L; ++l) off[l] = off[l - 1] + sizes[l - 1];
  if (revised.cols() != N || off[L] + sizes[L] != N)
    throw ShapeError("anneal_update: adjacency " + revised.shape().str() + " does not match layer sizes");
  const auto a = revised.values();

  StructureUpdate up;
  auto block = [&](std::size_t row_off, std::size_t rows, std::size_t col_off, std::size_t cols, const Tensor& prior,
                   const Tensor& current, std::size_t layer, std::vector<EdgeRef>& added,
                   std::vector<EdgeRef>& removed) {
    std::vector<double> out(rows * cols);
    const auto pv = prior.values(), cv = current.values();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t k = 0; k < cols; ++k) {
        const std::size_t idx = i * cols + k;
        const bool on = a[(row_off + i) * N + col_off + k] > threshold || pv[idx] != 0.0;
        out[idx] = on ? 1.0 : 0.0;
        const bool was = cv[idx] != 0.0;
        if (on && !was) added.emplace_back(layer, i, k);
        if (!on && was) removed.emplace_back(layer, i, k);
      }
    }
    return Tensor::from({rows, cols}, std::move(out));
  };
  for (std::size_t l = 1; l <= L; ++l) {
    up.S.push_back(block(off[l - 1], sizes[l - 1], off[l], sizes[l], prior_S.at(l - 1), current_S.at(l - 1), l,
                         up.event.added_s, up.event.removed_s));
    up.C.push_back(block(0, V, off[l], sizes[l], prior_C.at(l - 1), current_C.at(l - 1), l, up.event.added_c,
                         up.event.removed_c));
  }
  return up;
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,nll,graph_ll,kl,elbo,wall_ms\n" << std::setprecision(17);
  for (const auto& r : records)
    out << r.iteration << ',' << r.nll << ',' << r.graph_ll << ',' << r.kl << ',' << r.elbo << ',' << r.wall_ms << '\n';
}

void TrainReport::write_revisions_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,kind,layer,row,col\n";
  for (const auto& ev : revisions) {
    auto emit = [&](const char* kind, const std::vector<EdgeRef>& edges) {
      for (const auto& [l, i, k] : edges) out << ev.iteration << ',' << kind << ',' << l << ',' << i << ',' << k << '\n';
    };
    emit("add_S", ev.added_s);
    emit("remove_S", ev.removed_s);
    emit("add_C", ev.added_c);
    emit("remove_C", ev.removed_c);
  }
}

namespace {

std::vector<std::size_t> resolve_layers(const TopicTree& tree, const TrainConfig& config) {
  auto sizes = tree.layer_sizes();
  if (!config.layers.empty()) {
    std::vector<std::size_t> want(sizes.begin() + 1, sizes.end());
    if (want != config.layers) throw UsageError("config layer sizes do not match the topic tree");
  }
  return sizes;
}

}  // namespace

TrainResult train(const Corpus& corpus, const TopicTree& tree, const TrainConfig& config,
                  const IterationCallback& on_iteration) {
  config.validate();
  const auto sizes = resolve_layers(tree, config);
  if (sizes[0] != corpus.vocab_size())
    throw UsageError("tree has " + std::to_string(sizes[0]) + " words but the corpus vocabulary has " +
                     std::to_string(corpus.vocab_size()));
  const GraphMatrices prior = to_matrices(tree);

  Rng init_rng(config.seed);
  TrainResult result{init_params(sizes, config, init_rng), {}, prior.S, prior.C};
  ModelParams& params = result.params;
  BatchSampler sampler(corpus, config.batch_size, config.seed + 1);
  Rng noise(config.seed + 2);
  AdamW optimizer(params.named(), {config.learning_rate, config.weight_decay});

  TrainConfig saved_config = config;
  auto save = [&] {
    if (config.checkpoint_path.empty()) return;
    write_checkpoint(config.checkpoint_path, make_checkpoint(params, saved_config, tree, result.S, result.C));
  };

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    Tape tape;
    Tape::Scope scope(tape);
    Batch batch = sampler.next();
    ForwardGraph graph = graph_forward(params, prior.normalized);
    if (params.adaptive() && it % config.anneal_period == 0) {
      StructureUpdate up =
          anneal_update(graph.adjacency, sizes, prior.S, prior.C, result.S, result.C, config.threshold);
      result.S = std::move(up.S);
      result.C = std::move(up.C);
      up.event.iteration = it;
      result.report.revisions.push_back(std::move(up.event));
    }
    ElboResult r = elbo(batch.counts, params, graph, result.S, result.C, config, noise);
    tape.backward(neg(r.objective));
    optimizer.step();

    const double docs = static_cast<double>(batch.doc_ids.size());
    IterationRecord rec;
    rec.iteration = it;
    rec.nll = -r.terms.reconstruction / docs;
    rec.graph_ll = r.terms.graph_ll;
    rec.kl = r.terms.kl / docs;
    rec.elbo = r.terms.total;
    rec.terms = r.terms;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (it % config.log_every == 0) result.report.records.push_back(rec);
    if (on_iteration) on_iteration(rec, params);
    if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0) save();
  }
  save();
  return result;
}

std::vector<Tensor> infer_theta(const ModelParams& params, const Tensor& normalized_adjacency, const Corpus& corpus,
                                const std::vector<std::size_t>& doc_ids, const TrainConfig& config) {
  ForwardGraph graph = graph_forward(params, normalized_adjacency);
  Rng unused(0);
  const std::size_t L = params.num_layers();
  std::vector<std::vector<double>> rows(L);
  const std::size_t chunk = std::max<std::size_t>(config.batch_size, 1);
  for (std::size_t start = 0; start < doc_ids.size(); start += chunk) {
    std::vector<std::size_t> ids(doc_ids.begin() + static_cast<std::ptrdiff_t>(start),
                                 doc_ids.begin() + static_cast<std::ptrdiff_t>(std::min(start + chunk, doc_ids.size())));
    VariationalState st = encode(dense_counts(corpus, ids), graph.phi, params, ClampBounds::from(config), unused, true);
    for (std::size_t l = 0; l < L; ++l) rows[l].insert(rows[l].end(), st.theta[l].values().begin(), st.theta[l].values().end());
  }
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < L; ++l) out.push_back(Tensor::from({doc_ids.size(), params.layer_sizes[l + 1]}, std::move(rows[l])));
  return out;
}

}  // namespace topickg
