#include "topickg/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "topickg/error.hpp"

namespace topickg {

std::string to_string(Mode mode) { return mode == Mode::kTopicKG ? "topickg" : "topickga"; }

Mode parse_mode(const std::string& text) {
  if (text == "topickg") return Mode::kTopicKG;
  if (text == "topickga") return Mode::kTopicKGA;
  throw UsageError("unknown mode '" + text + "' (expected topickg or topickga)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw UsageError("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = {
      "mode",          "layers",        "embedding_dim", "hidden_dim",  "gcn_layers",   "beta",
      "threshold",     "anneal_period", "batch_size",    "learning_rate", "weight_decay", "iterations",
      "seed",          "gamma_prior",   "rate_prior",    "init_std",    "k_min",        "k_max",
      "lam_min",       "lam_max",       "log_every",     "checkpoint_every", "checkpoint_path"};
  return k;
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  auto sz = [&] { return parse_number<std::size_t>(key, value); };
  auto dbl = [&] { return parse_number<double>(key, value); };
  if (key == "mode") mode = parse_mode(value);
  else if (key == "layers") {
    layers.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!trim(item).empty()) layers.push_back(parse_number<std::size_t>(key, trim(item)));
  } else if (key == "embedding_dim") embedding_dim = sz();
  else if (key == "hidden_dim") hidden_dim = sz();
  else if (key == "gcn_layers") gcn_layers = sz();
  else if (key == "beta") beta = dbl();
  else if (key == "threshold") threshold = dbl();
  else if (key == "anneal_period") anneal_period = sz();
  else if (key == "batch_size") batch_size = sz();
  else if (key == "learning_rate") learning_rate = dbl();
  else if (key == "weight_decay") weight_decay = dbl();
  else if (key == "iterations") iterations = sz();
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "gamma_prior") gamma_prior = dbl();
  else if (key == "rate_prior") rate_prior = dbl();
  else if (key == "init_std") init_std = dbl();
  else if (key == "k_min") k_min = dbl();
  else if (key == "k_max") k_max = dbl();
  else if (key == "lam_min") lam_min = dbl();
  else if (key == "lam_max") lam_max = dbl();
  else if (key == "log_every") log_every = sz();
  else if (key == "checkpoint_every") checkpoint_every = sz();
  else if (key == "checkpoint_path") checkpoint_path = value;
  else throw UsageError("unknown config key '" + key + "'");
}

std::string TrainConfig::get(const std::string& key) const {
  if (key == "mode") return to_string(mode);
  if (key == "layers") {
    std::string s;
    for (std::size_t i = 0; i < layers.size(); ++i) s += (i ? "," : "") + std::to_string(layers[i]);
    return s;
  }
  if (key == "embedding_dim") return std::to_string(embedding_dim);
  if (key == "hidden_dim") return std::to_string(hidden_dim);
  if (key == "gcn_layers") return std::to_string(gcn_layers);
  if (key == "beta") return fmt_double(beta);
  if (key == "threshold") return fmt_double(threshold);
  if (key == "anneal_period") return std::to_string(anneal_period);
  if (key == "batch_size") return std::to_string(batch_size);
  if (key == "learning_rate") return fmt_double(learning_rate);
  if (key == "weight_decay") return fmt_double(weight_decay);
  if (key == "iterations") return std::to_string(iterations);
  if (key == "seed") return std::to_string(seed);
  if (key == "gamma_prior") return fmt_double(gamma_prior);
  if (key == "rate_prior") return fmt_double(rate_prior);
  if (key == "init_std") return fmt_double(init_std);
  if (key == "k_min") return fmt_double(k_min);
  if (key == "k_max") return fmt_double(k_max);
  if (key == "lam_min") return fmt_double(lam_min);
  if (key == "lam_max") return fmt_double(lam_max);
  if (key == "log_every") return std::to_string(log_every);
  if (key == "checkpoint_every") return std::to_string(checkpoint_every);
  if (key == "checkpoint_path") return checkpoint_path;
  throw UsageError("unknown config key '" + key + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw UsageError("invalid config: " + m); };
  if (embedding_dim == 0) fail("embedding_dim must be > 0");
  if (hidden_dim == 0) fail("hidden_dim must be > 0");
  if (!(beta >= 0.0)) fail("beta must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold must lie in (0, 1)");
  if (anneal_period < 1) fail("anneal_period must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(gamma_prior > 0.0) || !(rate_prior > 0.0)) fail("gamma_prior and rate_prior must be > 0");
  if (!(k_min > 0.0 && k_min < k_max)) fail("need 0 < k_min < k_max");
  if (!(lam_min > 0.0 && lam_min < lam_max)) fail("need 0 < lam_min < lam_max");
  if (log_every < 1) fail("log_every must be >= 1");
  for (auto k : layers)
    if (k == 0) fail("layer sizes must be positive");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  for (const auto& k : keys()) os << k << " = " << get(k) << '\n';
  return os.str();
}

TrainConfig TrainConfig::from_text(const std::string& text, const std::string& source) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'key = value'");
    try {
      cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), path.string());
}

}  // namespace topickg
