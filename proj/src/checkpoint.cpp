#include "topickg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "topickg/error.hpp"

namespace topickg {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMagic = "TOPICKG-CHECKPOINT 1";

void put_double(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_double(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

const Tensor& Checkpoint::array(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return t;
  throw Error("checkpoint: missing array '" + name + "'");
}

bool Checkpoint::has_array(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return true;
  return false;
}

void write_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  std::string manifest = ckpt.config.to_text();
  for (std::size_t i = 0; i < ckpt.nodes.size(); ++i)
    manifest += "node " + std::to_string(i) + " " + std::to_string(ckpt.nodes[i].layer) + " " + ckpt.nodes[i].name + "\n";
  std::string out = std::string(kMagic) + "\n";
  out += "manifest " + std::to_string(manifest.size()) + "\n" + manifest;
  out += "arrays " + std::to_string(ckpt.arrays.size()) + "\n";
  for (const auto& [name, t] : ckpt.arrays) {
    out += name + " " + std::to_string(t.rows()) + " " + std::to_string(t.cols()) + "\n";
    for (double v : t.values()) put_double(out, v);
  }
  const fs::path tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw IoError("cannot write " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  const std::string file = path.string();
  auto line = [&]() {
    const auto nl = data.find('\n', pos);
    if (nl == std::string::npos) throw Error(file + ": truncated checkpoint");
    std::string s = data.substr(pos, nl - pos);
    pos = nl + 1;
    return s;
  };
  if (line() != kMagic) throw Error(file + ": not a checkpoint");
  std::size_t manifest_size = 0;
  {
    std::istringstream is(line());
    std::string tag;
    if (!(is >> tag >> manifest_size) || tag != "manifest") throw Error(file + ": bad manifest header");
  }
  if (pos + manifest_size > data.size()) throw Error(file + ": truncated manifest");
  const std::string manifest = data.substr(pos, manifest_size);
  pos += manifest_size;

  Checkpoint ckpt;
  std::string config_text;
  {
    std::istringstream is(manifest);
    std::string l;
    while (std::getline(is, l)) {
      if (l.rfind("node ", 0) == 0) {
        std::istringstream ns(l.substr(5));
        std::size_t id, layer;
        std::string name;
        if (!(ns >> id >> layer >> name) || id != ckpt.nodes.size()) throw Error(file + ": bad node line '" + l + "'");
        ckpt.nodes.push_back({name, layer, {}});
      } else {
        config_text += l + "\n";
      }
    }
  }
  ckpt.config = TrainConfig::from_text(config_text, file);

  std::size_t count = 0;
  {
    std::istringstream is(line());
    std::string tag;
    if (!(is >> tag >> count) || tag != "arrays") throw Error(file + ": bad arrays header");
  }
  for (std::size_t a = 0; a < count; ++a) {
    std::istringstream is(line());
    std::string name;
    std::size_t rows, cols;
    if (!(is >> name >> rows >> cols)) throw Error(file + ": bad array header");
    const std::size_t n = rows * cols;
    if (pos + 8 * n > data.size()) throw Error(file + ": truncated array '" + name + "'");
    std::vector<double> v(n);
    const auto* p = reinterpret_cast<const unsigned char*>(data.data() + pos);
    for (std::size_t i = 0; i < n; ++i) v[i] = get_double(p + 8 * i);
    pos += 8 * n;
    ckpt.arrays.emplace_back(name, Tensor::from({rows, cols}, std::move(v)));
  }
  return ckpt;
}

Checkpoint make_checkpoint(const ModelParams& params, const TrainConfig& config, const TopicTree& tree,
                           const std::vector<Tensor>& S, const std::vector<Tensor>& C) {
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.config.layers.assign(params.layer_sizes.begin() + 1, params.layer_sizes.end());
  for (const auto& n : tree.nodes) ckpt.nodes.push_back({n.name, n.layer, {}});
  for (const auto& [name, t] : params.named()) ckpt.arrays.emplace_back(name, t.detach());
  ckpt.arrays.emplace_back("prior.gamma", Tensor::from({1, params.gamma.size()}, params.gamma));
  ckpt.arrays.emplace_back("prior.rate", Tensor::scalar(params.rate));
  for (std::size_t l = 0; l < S.size(); ++l) {
    ckpt.arrays.emplace_back("structure.S." + std::to_string(l + 1), S[l].detach());
    ckpt.arrays.emplace_back("structure.C." + std::to_string(l + 1), C[l].detach());
  }
  return ckpt;
}

ModelParams params_from_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::size_t> sizes(ckpt.config.layers.size() + 1, 0);
  for (const auto& n : ckpt.nodes) {
    if (n.layer >= sizes.size()) throw Error("checkpoint: node layer exceeds configured layers");
    ++sizes[n.layer];
  }
  for (std::size_t l = 1; l < sizes.size(); ++l)
    if (sizes[l] != ckpt.config.layers[l - 1]) throw Error("checkpoint: node ordering disagrees with layer sizes");
  // Build a skeleton with the right structure, then overwrite every array.
  Rng rng(0);
  ModelParams p = init_params(sizes, ckpt.config, rng);
  for (auto& [name, t] : p.named()) {
    const Tensor& src = ckpt.array(name);
    if (!(src.shape() == t.shape()))
      throw ShapeError("checkpoint: array '" + name + "' has shape " + src.shape().str() + ", expected " +
                       t.shape().str());
    auto dst = t.mutable_values();
    std::copy(src.values().begin(), src.values().end(), dst.begin());
  }
  const Tensor& g = ckpt.array("prior.gamma");
  p.gamma.assign(g.values().begin(), g.values().end());
  p.rate = ckpt.array("prior.rate").item();
  return p;
}

}  // namespace topickg
