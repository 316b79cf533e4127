#include "topickg/taxonomy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "topickg/error.hpp"

namespace topickg {

namespace fs = std::filesystem;

std::size_t TopicTree::num_layers() const {
  if (nodes.empty()) return 0;
  return nodes.back().layer;
}

std::vector<std::size_t> TopicTree::layer_sizes() const {
  std::vector<std::size_t> sizes(num_layers() + 1, 0);
  for (const auto& n : nodes) ++sizes[n.layer];
  return sizes;
}

std::size_t TopicTree::layer_offset(std::size_t layer) const {
  const auto sizes = layer_sizes();
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += sizes.at(l);
  return off;
}

void TopicTree::validate() const {
  if (nodes.empty()) throw Error("tree: no nodes");
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (nodes[i].layer < nodes[i - 1].layer) throw Error("tree: nodes are not ordered by layer");
  const auto sizes = layer_sizes();
  for (std::size_t l = 0; l < sizes.size(); ++l)
    if (sizes[l] == 0) throw Error("tree: layer " + std::to_string(l) + " is empty");
  if (num_layers() < 1) throw Error("tree: needs at least one topic layer");
  for (const auto& [p, c] : edges) {
    if (p >= nodes.size() || c >= nodes.size()) throw Error("tree: edge references unknown node");
    if (nodes[p].layer != nodes[c].layer + 1)
      throw Error("tree: edge " + std::to_string(p) + "->" + std::to_string(c) + " does not join adjacent layers");
  }
  for (const auto& [t, w] : concepts) {
    if (t >= nodes.size() || w >= nodes.size()) throw Error("tree: concept references unknown node");
    if (nodes[t].layer == 0 || nodes[w].layer != 0) throw Error("tree: concept must link a topic to a word");
  }
}

std::vector<std::pair<std::string, std::string>> read_lexicon(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream is(line);
    std::string child, parent, extra;
    if (!(is >> child)) continue;
    if (child[0] == '#') continue;
    if (!(is >> parent) || (is >> extra)) throw ParseError(path.string(), lineno, "expected '<child> <parent>'");
    pairs.emplace_back(child, parent);
  }
  return pairs;
}

namespace {

std::vector<std::string> name_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == '_' || ch == '-' || ch == ' ' || ch == '\t' || ch == '.' || ch == ',') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

TopicTree build_tree(const std::vector<std::string>& vocab,
                     const std::vector<std::pair<std::string, std::string>>& hypernyms, std::size_t max_layers,
                     BuildReport* report, const std::map<std::string, std::string>& definitions) {
  if (max_layers < 1) throw UsageError("build_tree: need at least one topic layer");
  std::unordered_map<std::string, std::string> parent;
  for (const auto& [c, p] : hypernyms) parent.emplace(c, p);  // first listed parent wins

  // Cycle check over the whole lexicon.
  {
    std::unordered_map<std::string, int> state;  // 1 = on current path, 2 = done
    for (const auto& [start, unused] : parent) {
      if (state[start] == 2) continue;
      std::vector<std::string> path;
      std::string cur = start;
      while (true) {
        int& st = state[cur];
        if (st == 2) break;
        if (st == 1) {
          auto it = std::find(path.begin(), path.end(), cur);
          std::string cyc;
          for (; it != path.end(); ++it) cyc += *it + " -> ";
          throw DomainError("hypernym cycle: " + cyc + cur);
        }
        st = 1;
        path.push_back(cur);
        auto p = parent.find(cur);
        if (p == parent.end()) break;
        cur = p->second;
      }
      for (const auto& n : path) state[n] = 2;
    }
  }

  BuildReport local;
  BuildReport& rep = report ? *report : local;
  std::vector<std::vector<std::string>> chains(vocab.size());
  std::vector<std::size_t> leaves;
  for (std::size_t v = 0; v < vocab.size(); ++v) {
    for (auto it = parent.find(vocab[v]); it != parent.end(); it = parent.find(it->second))
      chains[v].push_back(it->second);
    if (chains[v].empty()) rep.unmatched_words.push_back(vocab[v]);
    else leaves.push_back(v);
  }
  if (leaves.empty()) throw DomainError("build_tree: vocabulary and lexicon do not intersect");

  std::set<std::string> tops;
  for (std::size_t v : leaves) tops.insert(chains[v].back());
  if (tops.size() > 1)
    for (std::size_t v : leaves) chains[v].push_back("<root>");

  const std::size_t L = max_layers;
  // Per-layer node registry in order of first appearance.
  std::vector<std::vector<std::string>> layer_names(L + 1);
  std::vector<std::unordered_map<std::string, std::size_t>> layer_index(L + 1);
  auto intern = [&](std::size_t layer, const std::string& name) {
    auto [it, inserted] = layer_index[layer].emplace(name, layer_names[layer].size());
    if (inserted) layer_names[layer].push_back(name);
    return it->second;
  };
  // (layer of parent, parent local, child local)
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> local_edges;
  for (std::size_t v : leaves) {
    const auto& a = chains[v];
    const std::size_t m = a.size();
    std::vector<std::string> placed(L + 1);
    if (m >= L) {
      for (std::size_t l = 1; l < L; ++l) placed[l] = a[l - 1];
      placed[L] = a.back();
    } else {
      const std::size_t pad = L - m;
      for (std::size_t l = 1; l <= pad + 1; ++l) placed[l] = a[0];
      for (std::size_t j = 2; j <= m; ++j) placed[pad + j] = a[j - 1];
    }
    std::size_t child_local = v;
    for (std::size_t l = 1; l <= L; ++l) {
      const std::size_t local = intern(l, placed[l]);
      local_edges.emplace(l, local, child_local);
      child_local = local;
    }
  }

  TopicTree tree;
  for (const auto& w : vocab) tree.nodes.push_back({w, 0, {}});
  std::vector<std::size_t> offset(L + 1, 0);
  offset[1] = vocab.size();
  for (std::size_t l = 1; l <= L; ++l) {
    if (l > 1) offset[l] = offset[l - 1] + layer_names[l - 1].size();
    for (const auto& name : layer_names[l]) {
      auto def = definitions.find(name);
      tree.nodes.push_back({name, l, def == definitions.end() ? std::string{} : def->second});
    }
  }
  for (const auto& [l, p, c] : local_edges) tree.edges.emplace_back(offset[l] + p, offset[l - 1] + c);
  std::sort(tree.edges.begin(), tree.edges.end());

  std::unordered_map<std::string, std::size_t> word_id;
  for (std::size_t v = 0; v < vocab.size(); ++v) word_id.emplace(vocab[v], v);
  for (std::size_t id = vocab.size(); id < tree.nodes.size(); ++id) {
    const auto& node = tree.nodes[id];
    std::set<std::size_t> words;
    for (const auto& tok : name_tokens(node.definition)) {
      auto it = word_id.find(tok);
      if (it != word_id.end()) words.insert(it->second);
    }
    if (node.definition.empty())
      for (const auto& tok : name_tokens(node.name)) {
        auto it = word_id.find(tok);
        if (it != word_id.end()) words.insert(it->second);
      }
    for (std::size_t w : words) tree.concepts.emplace_back(id, w);
  }
  tree.validate();
  rep.layer_sizes = tree.layer_sizes();
  return tree;
}

void write_tree(const TopicTree& tree, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    out << "NODE " << i << ' ' << tree.nodes[i].layer << ' ' << tree.nodes[i].name << '\n';
  for (const auto& [p, c] : tree.edges) out << "EDGE " << p << ' ' << c << '\n';
  for (const auto& [t, w] : tree.concepts) out << "CONCEPT " << t << ' ' << w << '\n';
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    if (!tree.nodes[i].definition.empty()) out << "DEF " << i << ' ' << tree.nodes[i].definition << '\n';
}

namespace {
bool to_size(const std::string& s, std::size_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}
}  // namespace

TopicTree read_tree(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TopicTree tree;
  std::string line;
  std::size_t lineno = 0;
  const std::string file = path.string();
  std::vector<std::pair<std::size_t, std::string>> defs;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream is(line);
    std::string tag;
    if (!(is >> tag) || tag[0] == '#') continue;
    std::string a, b, c;
    std::size_t x = 0, y = 0;
    if (tag == "NODE") {
      if (!(is >> a >> b >> c) || !to_size(a, x) || !to_size(b, y)) throw ParseError(file, lineno, "expected NODE <id> <layer> <name>");
      if (x != tree.nodes.size()) throw ParseError(file, lineno, "node ids must be consecutive from 0");
      if (!tree.nodes.empty() && y < tree.nodes.back().layer) throw ParseError(file, lineno, "nodes must be ordered by layer");
      tree.nodes.push_back({c, y, {}});
    } else if (tag == "EDGE" || tag == "CONCEPT") {
      if (!(is >> a >> b) || !to_size(a, x) || !to_size(b, y)) throw ParseError(file, lineno, "expected " + tag + " <id> <id>");
      if (x >= tree.nodes.size() || y >= tree.nodes.size()) throw ParseError(file, lineno, "unknown node id");
      if (tag == "EDGE") {
        if (tree.nodes[x].layer != tree.nodes[y].layer + 1) throw ParseError(file, lineno, "edge must join adjacent layers");
        tree.edges.emplace_back(x, y);
      } else {
        if (tree.nodes[x].layer == 0 || tree.nodes[y].layer != 0) throw ParseError(file, lineno, "concept must link a topic to a word");
        tree.concepts.emplace_back(x, y);
      }
    } else if (tag == "DEF") {
      if (!(is >> a) || !to_size(a, x)) throw ParseError(file, lineno, "expected DEF <id> <text>");
      std::string rest;
      std::getline(is, rest);
      const auto first = rest.find_first_not_of(' ');
      defs.emplace_back(x, first == std::string::npos ? std::string{} : rest.substr(first));
    } else {
      throw ParseError(file, lineno, "unknown record '" + tag + "'");
    }
  }
  for (auto& [id, text] : defs) {
    if (id >= tree.nodes.size()) throw ParseError(file, lineno, "DEF for unknown node " + std::to_string(id));
    tree.nodes[id].definition = std::move(text);
  }
  tree.validate();
  return tree;
}

std::size_t GraphMatrices::offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += layer_sizes.at(l);
  return off;
}

std::size_t GraphMatrices::num_nodes() const {
  std::size_t n = 0;
  for (auto k : layer_sizes) n += k;
  return n;
}

Tensor adjacency_from_blocks(const std::vector<std::size_t>& sizes, const std::vector<Tensor>& S,
                             const std::vector<Tensor>& C) {
  std::size_t N = 0;
  std::vector<std::size_t> off;
  for (auto k : sizes) {
    off.push_back(N);
    N += k;
  }
  std::vector<double> a(N * N, 0.0);
  for (std::size_t i = 0; i < N; ++i) a[i * N + i] = 1.0;
  auto link = [&](std::size_t i, std::size_t j) {
    a[i * N + j] = 1.0;
    a[j * N + i] = 1.0;
  };
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    const Tensor& s = S.at(l - 1);
    for (std::size_t r = 0; r < s.rows(); ++r)
      for (std::size_t c = 0; c < s.cols(); ++c)
        if (s.values()[r * s.cols() + c] != 0.0) link(off[l - 1] + r, off[l] + c);
    const Tensor& cm = C.at(l - 1);
    for (std::size_t r = 0; r < cm.rows(); ++r)
      for (std::size_t c = 0; c < cm.cols(); ++c)
        if (cm.values()[r * cm.cols() + c] != 0.0) link(r, off[l] + c);
  }
  return Tensor::from({N, N}, std::move(a));
}

Tensor normalize_adjacency(const Tensor& adjacency) {
  const std::size_t N = adjacency.rows();
  if (adjacency.cols() != N) throw ShapeError("normalize_adjacency: not square " + adjacency.shape().str());
  const auto a = adjacency.values();
  std::vector<double> inv_sqrt(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < N; ++j) d += a[i * N + j];
    inv_sqrt[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  std::vector<double> out(N * N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) out[i * N + j] = inv_sqrt[i] * a[i * N + j] * inv_sqrt[j];
  return Tensor::from({N, N}, std::move(out));
}

GraphMatrices to_matrices(const TopicTree& tree) {
  tree.validate();
  GraphMatrices g;
  g.layer_sizes = tree.layer_sizes();
  const std::size_t L = g.layer_sizes.size() - 1, V = g.layer_sizes[0];
  std::vector<std::size_t> off(L + 1, 0);
  for (std::size_t l = 1; l <= L; ++l) off[l] = off[l - 1] + g.layer_sizes[l - 1];
  for (std::size_t l = 1; l <= L; ++l) {
    g.S.push_back(Tensor::zeros({g.layer_sizes[l - 1], g.layer_sizes[l]}));
    g.C.push_back(Tensor::zeros({V, g.layer_sizes[l]}));
  }
  for (const auto& [p, c] : tree.edges) {
    const std::size_t l = tree.nodes[p].layer;
    Tensor& s = g.S[l - 1];
    s.mutable_values()[(c - off[l - 1]) * s.cols() + (p - off[l])] = 1.0;
  }
  for (const auto& [t, w] : tree.concepts) {
    const std::size_t l = tree.nodes[t].layer;
    Tensor& cm = g.C[l - 1];
    cm.mutable_values()[w * cm.cols() + (t - off[l])] = 1.0;
  }
  g.adjacency = adjacency_from_blocks(g.layer_sizes, g.S, g.C);
  g.normalized = normalize_adjacency(g.adjacency);
  return g;
}

Tensor adaptive_adjacency(const Tensor& adaptive_embeddings) {
  return softmax_rows(cosine_similarity_rows(transpose(adaptive_embeddings)));
}

Tensor revise_adjacency(const Tensor& normalized, const Tensor& adaptive) {
  if (!(normalized.shape() == adaptive.shape()))
    throw ShapeError("revise_adjacency: " + normalized.shape().str() + " vs " + adaptive.shape().str());
  return add(normalized, adaptive);
}

}  // namespace topickg
