#include "topickg/export.hpp"

#include <iomanip>
#include <set>
#include <sstream>

#include "topickg/error.hpp"
#include "topickg/metrics.hpp"
#include "topickg/trainer.hpp"

namespace topickg {

ExportFormat parse_export_format(const std::string& name) {
  if (name == "text") return ExportFormat::kText;
  if (name == "dot") return ExportFormat::kDot;
  throw UsageError("unknown export format '" + name + "' (expected text or dot)");
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string export_tree(const ModelParams& params, const TopicTree& tree, const std::vector<Tensor>& S,
                        const std::vector<Tensor>& C, const ExportOptions& options) {
  const auto sizes = tree.layer_sizes();
  if (sizes != params.layer_sizes) throw UsageError("export: tree does not match the checkpoint's layer sizes");
  const std::size_t L = sizes.size() - 1, V = sizes[0];
  if (options.top_k == 0 || options.top_k > V) throw UsageError("export: top-k must lie in [1, V]");

  const GraphMatrices prior = to_matrices(tree);
  const ForwardGraph graph = graph_forward(params, prior.normalized);

  std::vector<std::size_t> off(L + 1, 0);
  for (std::size_t l = 1; l <= L; ++l) off[l] = off[l - 1] + sizes[l - 1];

  std::vector<std::vector<std::string>> keywords(tree.num_nodes());
  for (std::size_t l = 1; l <= L; ++l)
    for (std::size_t k = 0; k < sizes[l]; ++k)
      for (const auto& rw : top_words(graph.phi, l, k, options.top_k)) keywords[off[l] + k].push_back(tree.nodes[rw.word].name);

  struct Edge {
    std::size_t parent, child;
    double weight;
    bool added;
  };
  std::vector<Edge> edges;
  std::vector<std::tuple<std::size_t, std::size_t, bool>> concepts;
  for (std::size_t l = 1; l <= L; ++l) {
    const Tensor& s = S.at(l - 1);
    const Tensor& c = C.at(l - 1);
    const Tensor& phi = graph.phi[l - 1];
    for (std::size_t i = 0; i < sizes[l - 1]; ++i) {
      for (std::size_t k = 0; k < sizes[l]; ++k) {
        if (s.values()[i * sizes[l] + k] == 0.0) continue;
        const double w = phi.values()[i * sizes[l] + k];
        if (w < options.min_weight) continue;
        edges.push_back({off[l] + k, off[l - 1] + i, w, prior.S[l - 1].values()[i * sizes[l] + k] == 0.0});
      }
    }
    for (std::size_t v = 0; v < V; ++v)
      for (std::size_t k = 0; k < sizes[l]; ++k)
        if (c.values()[v * sizes[l] + k] != 0.0)
          concepts.emplace_back(off[l] + k, v, prior.C[l - 1].values()[v * sizes[l] + k] == 0.0);
  }

  std::ostringstream os;
  os << std::setprecision(17);
  if (options.format == ExportFormat::kText) {
    for (std::size_t id = 0; id < tree.num_nodes(); ++id) {
      const auto& n = tree.nodes[id];
      if (n.layer == 0) {
        os << "WORD " << id << ' ' << n.name << '\n';
        continue;
      }
      os << "TOPIC " << id << ' ' << n.layer << ' ' << n.name << ' ' << keywords[id].size();
      for (const auto& kw : keywords[id]) os << ' ' << kw;
      os << '\n';
    }
    for (const auto& e : edges) os << "EDGE " << e.parent << ' ' << e.child << ' ' << e.weight << ' ' << (e.added ? "new" : "prior") << '\n';
    for (const auto& [t, w, added] : concepts) os << "CONCEPT " << t << ' ' << w << ' ' << (added ? "new" : "prior") << '\n';
  } else {
    std::set<std::size_t> shown;
    for (const auto& e : edges) {
      shown.insert(e.parent);
      shown.insert(e.child);
    }
    for (std::size_t id = V; id < tree.num_nodes(); ++id) shown.insert(id);
    os << "digraph topics {\n  node [shape=box];\n";
    for (std::size_t id : shown) {
      const auto& n = tree.nodes[id];
      os << "  n" << id << " [label=\"" << dot_escape(n.name);
      if (n.layer > 0) {
        os << "\\n";
        for (std::size_t i = 0; i < keywords[id].size(); ++i) os << (i ? " " : "") << dot_escape(keywords[id][i]);
      } else {
        os << "\", shape=plaintext";
        os << "];\n";
        continue;
      }
      os << "\"];\n";
    }
    for (const auto& e : edges) {
      os << "  n" << e.parent << " -> n" << e.child << " [label=\"" << std::setprecision(3) << e.weight << "\""
         << std::setprecision(17);
      if (e.added) os << ", style=dashed, color=red";
      os << "];\n";
    }
    os << "}\n";
  }
  return os.str();
}

ExportedTree parse_export(const std::string& text) {
  ExportedTree t;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  auto mark = [&](const std::string& s) {
    if (s == "new") return true;
    if (s == "prior") return false;
    throw ParseError("<export>", lineno, "expected prior|new");
  };
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "WORD") {
      ExportedNode n;
      if (!(ls >> n.id >> n.name)) throw ParseError("<export>", lineno, "bad WORD record");
      t.nodes.push_back(std::move(n));
    } else if (tag == "TOPIC") {
      ExportedNode n;
      std::size_t k = 0;
      if (!(ls >> n.id >> n.layer >> n.name >> k)) throw ParseError("<export>", lineno, "bad TOPIC record");
      for (std::size_t i = 0; i < k; ++i) {
        std::string kw;
        if (!(ls >> kw)) throw ParseError("<export>", lineno, "keyword list shorter than its count");
        n.keywords.push_back(kw);
      }
      t.nodes.push_back(std::move(n));
    } else if (tag == "EDGE") {
      ExportedEdge e;
      std::string m;
      if (!(ls >> e.parent >> e.child >> e.weight >> m)) throw ParseError("<export>", lineno, "bad EDGE record");
      e.added = mark(m);
      t.edges.push_back(e);
    } else if (tag == "CONCEPT") {
      ExportedConcept c;
      std::string m;
      if (!(ls >> c.topic >> c.word >> m)) throw ParseError("<export>", lineno, "bad CONCEPT record");
      c.added = mark(m);
      t.concepts.push_back(c);
    } else {
      throw ParseError("<export>", lineno, "unknown record '" + tag + "'");
    }
  }
  return t;
}

}  // namespace topickg
