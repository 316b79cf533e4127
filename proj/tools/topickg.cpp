// Command-line front end: build-tree, train, eval, export, sweep, synth.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "topickg/checkpoint.hpp"
#include "topickg/config.hpp"
#include "topickg/corpus.hpp"
#include "topickg/error.hpp"
#include "topickg/evaluate.hpp"
#include "topickg/export.hpp"
#include "topickg/sweep.hpp"
#include "topickg/synthetic.hpp"
#include "topickg/taxonomy.hpp"
#include "topickg/trainer.hpp"

namespace fs = std::filesystem;
using namespace topickg;

namespace {

struct CorpusArgs {
  std::string docs, stem, vocab, labels, split, stopwords, format = "auto";
  std::size_t min_count = 20, max_vocab = 0;
  double test_fraction = 0.0;
  std::uint64_t split_seed = 1;

  void add(CLI::App* app) {
    app->add_option("--corpus", docs, "documents: one tokenized doc per line, or doc word count triplets");
    app->add_option("--corpus-stem", stem, "corpus saved by build-tree --save-corpus or synth");
    app->add_option("--vocab", vocab, "vocabulary file, one word per line");
    app->add_option("--labels", labels, "one integer label per document");
    app->add_option("--split", split, "one train|test per document");
    app->add_option("--stopwords", stopwords, "words to drop");
    app->add_option("--min-count", min_count, "minimum corpus-wide word count");
    app->add_option("--max-vocab", max_vocab, "keep the most frequent words only (0 = all)");
    app->add_option("--doc-format", format, "auto|text|triplets");
    app->add_option("--test-fraction", test_fraction, "random test split when no split file is given");
    app->add_option("--split-seed", split_seed, "seed of the random split");
  }

  Corpus load() const {
    Corpus c;
    if (!stem.empty()) {
      c = load_saved_corpus(stem);
    } else {
      if (docs.empty()) throw UsageError("give --corpus or --corpus-stem");
      LoadOptions o;
      if (!vocab.empty()) o.vocab_path = vocab;
      if (!labels.empty()) o.labels_path = labels;
      if (!split.empty()) o.split_path = split;
      if (!stopwords.empty()) o.stopwords_path = stopwords;
      o.min_count = min_count;
      o.max_vocab = max_vocab;
      if (format == "auto") o.format = DocFormat::kAuto;
      else if (format == "text") o.format = DocFormat::kText;
      else if (format == "triplets") o.format = DocFormat::kTriplets;
      else throw UsageError("unknown --doc-format '" + format + "'");
      LoadReport rep;
      c = load_corpus(docs, o, &rep);
      for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
      if (!rep.dropped_docs.empty()) std::cerr << "warning: dropped " << rep.dropped_docs.size() << " empty documents\n";
    }
    if (test_fraction > 0.0 && split.empty()) assign_random_split(c, test_fraction, split_seed);
    return c;
  }
};

/// --<key> for every TrainConfig key, applied on top of --config.
struct ConfigArgs {
  std::string path;
  std::map<std::string, std::string> values;

  void add(CLI::App* app) {
    app->add_option("--config", path, "key = value config file");
    for (const auto& k : TrainConfig::keys()) app->add_option("--" + k, values[k], "config key " + k);
  }

  TrainConfig build() const {
    TrainConfig c = path.empty() ? TrainConfig{} : TrainConfig::load(path);
    for (const auto& [k, v] : values)
      if (!v.empty()) c.set(k, v);
    c.validate();
    return c;
  }
};

void check_vocab(const Corpus& corpus, const TopicTree& tree) {
  if (tree.vocab_size() != corpus.vocab_size())
    throw UsageError("tree has " + std::to_string(tree.vocab_size()) + " words, corpus vocabulary has " +
                     std::to_string(corpus.vocab_size()));
  for (std::size_t v = 0; v < corpus.vocab_size(); ++v)
    if (tree.nodes[v].name != corpus.vocab[v])
      throw UsageError("tree word " + std::to_string(v) + " '" + tree.nodes[v].name + "' differs from vocabulary word '" +
                       corpus.vocab[v] + "'");
}

void check_nodes(const Checkpoint& ck, const TopicTree& tree) {
  if (ck.nodes.size() != tree.num_nodes()) throw UsageError("checkpoint and tree have different node counts");
  for (std::size_t i = 0; i < ck.nodes.size(); ++i)
    if (ck.nodes[i].name != tree.nodes[i].name || ck.nodes[i].layer != tree.nodes[i].layer)
      throw UsageError("checkpoint node " + std::to_string(i) + " does not match the tree");
}

std::vector<Tensor> structure(const Checkpoint& ck, const char* kind, std::size_t L) {
  std::vector<Tensor> out;
  for (std::size_t l = 1; l <= L; ++l) out.push_back(ck.array(std::string("structure.") + kind + "." + std::to_string(l)));
  return out;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw IoError("cannot write " + out);
  f << text;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad number '") + tok + "' in " + what);
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
  return out;
}

std::string quote(std::string s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c == '\n' ? ' ' : c);
  }
  return out + "\"";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TopicKG: deep topic model guided by a prior topic tree"};
  app.require_subcommand(1);

  // build-tree
  auto* bt = app.add_subcommand("build-tree", "map a hypernym lexicon onto the vocabulary");
  CorpusArgs bt_corpus;
  bt_corpus.add(bt);
  std::string bt_lexicon, bt_defs, bt_out, bt_save;
  std::size_t bt_layers = 3;
  bt->add_option("--lexicon", bt_lexicon, "child parent pairs, one per line")->required();
  bt->add_option("--definitions", bt_defs, "name<TAB>definition lines");
  bt->add_option("--layers", bt_layers, "number of topic layers");
  bt->add_option("--out", bt_out, "tree file")->required();
  bt->add_option("--save-corpus", bt_save, "also save the filtered corpus under this stem");

  // train
  auto* tr = app.add_subcommand("train", "fit a model");
  CorpusArgs tr_corpus;
  ConfigArgs tr_config;
  tr_corpus.add(tr);
  tr_config.add(tr);
  std::string tr_tree, tr_out = "run";
  bool tr_quiet = false;
  tr->add_option("--tree", tr_tree, "prior topic tree")->required();
  tr->add_option("--out-dir", tr_out, "checkpoint, train_report.csv and revisions.csv go here");
  tr->add_flag("--quiet", tr_quiet, "no progress lines");

  // eval
  auto* ev = app.add_subcommand("eval", "topic quality and classification metrics");
  CorpusArgs ev_corpus;
  ev_corpus.add(ev);
  std::string ev_ckpt, ev_tree, ev_emb, ev_out;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--tree", ev_tree)->required();
  ev->add_option("--embeddings", ev_emb, "word vectors for WE (default: learned word embeddings)");
  ev->add_option("--out", ev_out, "metrics CSV (default stdout)");

  // export
  auto* ex = app.add_subcommand("export", "write the learned topic hierarchy");
  std::string ex_ckpt, ex_tree, ex_format = "text", ex_out;
  std::size_t ex_topk = 10;
  double ex_min_weight = 0.0;
  ex->add_option("--checkpoint", ex_ckpt)->required();
  ex->add_option("--tree", ex_tree)->required();
  ex->add_option("--format", ex_format, "text|dot");
  ex->add_option("--top-k", ex_topk, "keywords per topic");
  ex->add_option("--min-weight", ex_min_weight, "drop edges with a smaller Phi weight");
  ex->add_option("--out", ex_out, "output file (default stdout)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "grid over beta and threshold, several seeds per cell");
  CorpusArgs sw_corpus;
  ConfigArgs sw_config;
  sw_corpus.add(sw);
  sw_config.add(sw);
  std::string sw_tree, sw_betas = "50", sw_thresholds = "0.4", sw_out = "sweep";
  std::size_t sw_seeds = 5, sw_workers = 1;
  sw->add_option("--tree", sw_tree)->required();
  sw->add_option("--betas", sw_betas, "comma-separated beta values");
  sw->add_option("--thresholds", sw_thresholds, "comma-separated threshold values");
  sw->add_option("--seeds", sw_seeds, "runs per cell");
  sw->add_option("--workers", sw_workers, "parallel runs");
  sw->add_option("--out-prefix", sw_out, "writes <prefix>_summary.csv and <prefix>_runs.csv");

  // synth
  auto* sy = app.add_subcommand("synth", "generate a planted corpus and its tree");
  PlantedSpec spec;
  std::string sy_out;
  sy->add_option("--out-stem", sy_out, "writes <stem>.vocab/.triplets/.split[/.labels] and <stem>.tree")->required();
  sy->add_option("--docs", spec.num_docs);
  sy->add_option("--groups", spec.groups);
  sy->add_option("--leaves-per-group", spec.leaves_per_group);
  sy->add_option("--words-per-topic", spec.words_per_topic);
  sy->add_option("--free-topics", spec.free_topics);
  sy->add_option("--noise-words", spec.noise_words);
  sy->add_option("--doc-length", spec.doc_length);
  sy->add_option("--noise", spec.noise);
  sy->add_option("--classes", spec.num_classes);
  sy->add_option("--test-fraction", spec.test_fraction);
  sy->add_option("--seed", spec.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error kind=usage message=" << quote(e.what()) << '\n';
    return 2;
  }

  try {
    if (*bt) {
      Corpus corpus = bt_corpus.load();
      std::map<std::string, std::string> defs;
      if (!bt_defs.empty()) {
        std::ifstream in(bt_defs);
        if (!in) throw IoError("cannot open " + bt_defs);
        std::string line;
        while (std::getline(in, line)) {
          const auto tab = line.find('\t');
          if (tab != std::string::npos) defs[line.substr(0, tab)] = line.substr(tab + 1);
        }
      }
      BuildReport rep;
      TopicTree tree = build_tree(corpus.vocab, read_lexicon(bt_lexicon), bt_layers, &rep, defs);
      write_tree(tree, bt_out);
      if (!bt_save.empty()) save_corpus(corpus, bt_save);
      std::cout << "layer_sizes";
      for (auto k : rep.layer_sizes) std::cout << ' ' << k;
      std::cout << "\nunmatched_words " << rep.unmatched_words.size() << '\n';
    } else if (*tr) {
      Corpus corpus = tr_corpus.load();
      TopicTree tree = read_tree(tr_tree);
      check_vocab(corpus, tree);
      TrainConfig cfg = tr_config.build();
      fs::create_directories(tr_out);
      if (cfg.checkpoint_path.empty()) cfg.checkpoint_path = (fs::path(tr_out) / "model.ckpt").string();
      TrainResult r = train(corpus, tree, cfg, [&](const IterationRecord& rec, const ModelParams&) {
        if (!tr_quiet && (rec.iteration % 100 == 0 || rec.iteration == cfg.iterations))
          std::cerr << "iteration " << rec.iteration << " nll " << rec.nll << " kl " << rec.kl << " graph_ll "
                    << rec.graph_ll << '\n';
      });
      r.report.write_csv(fs::path(tr_out) / "train_report.csv");
      r.report.write_revisions_csv(fs::path(tr_out) / "revisions.csv");
      std::cout << "checkpoint " << cfg.checkpoint_path << '\n';
    } else if (*ev) {
      Corpus corpus = ev_corpus.load();
      TopicTree tree = read_tree(ev_tree);
      check_vocab(corpus, tree);
      Checkpoint ck = read_checkpoint(ev_ckpt);
      check_nodes(ck, tree);
      EvalOptions opts;
      if (!ev_emb.empty()) opts.embeddings = load_embeddings(ev_emb, corpus.vocab);
      EvalMetrics m = evaluate(params_from_checkpoint(ck), to_matrices(tree).normalized, corpus, ck.config, opts);
      for (const auto& w : m.warnings) std::cerr << "warning: " << w << '\n';
      emit(m.csv(), ev_out);
    } else if (*ex) {
      ExportOptions opts;
      opts.format = parse_export_format(ex_format);
      opts.top_k = ex_topk;
      opts.min_weight = ex_min_weight;
      TopicTree tree = read_tree(ex_tree);
      Checkpoint ck = read_checkpoint(ex_ckpt);
      check_nodes(ck, tree);
      const std::size_t L = tree.num_layers();
      emit(export_tree(params_from_checkpoint(ck), tree, structure(ck, "S", L), structure(ck, "C", L), opts), ex_out);
    } else if (*sw) {
      Corpus corpus = sw_corpus.load();
      TopicTree tree = read_tree(sw_tree);
      check_vocab(corpus, tree);
      TrainConfig base = sw_config.build();
      std::vector<SweepCell> grid;
      for (double b : parse_list(sw_betas, "--betas"))
        for (double s : parse_list(sw_thresholds, "--thresholds")) grid.push_back({b, s});
      SweepOptions opts;
      opts.seeds = sw_seeds;
      opts.workers = sw_workers;
      SweepResult r = sweep(grid, corpus, tree, base, opts);
      r.write(sw_out + "_summary.csv", sw_out + "_runs.csv");
      std::size_t failed = 0;
      for (const auto& c : r.cells)
        for (const auto& run : c.runs) failed += !run.ok;
      std::cout << "runs " << grid.size() * sw_seeds << " failed " << failed << '\n';
    } else if (*sy) {
      PlantedData d = make_planted(spec);
      save_corpus(d.corpus, sy_out);
      write_tree(d.tree, sy_out + ".tree");
      std::cout << "vocab " << d.corpus.vocab_size() << " docs " << d.corpus.num_docs() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error kind=" << e.kind() << " message=" << quote(e.what()) << '\n';
    return e.kind() == std::string("usage") ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error kind=internal message=" << quote(e.what()) << '\n';
    return 1;
  }
  return 0;
}
