#include "topickg/sweep.hpp"

#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "topickg/error.hpp"
#include "topickg/trainer.hpp"

namespace topickg {

MetricRow metric_row(const EvalMetrics& m) {
  MetricRow row;
  for (const auto& l : m.layers) {
    const std::string s = std::to_string(l.layer);
    row["tc." + s] = l.tc;
    row["td." + s] = l.td;
    row["we." + s] = l.we;
  }
  if (m.has_classification) {
    row["micro_f1"] = m.micro_f1;
    row["macro_f1"] = m.macro_f1;
  }
  return row;
}

MetricRow train_and_evaluate(const Corpus& corpus, const TopicTree& tree, const TrainConfig& config,
                             const EvalOptions& eval) {
  TrainResult r = train(corpus, tree, config);
  MetricRow row = metric_row(evaluate(r.params, to_matrices(tree).normalized, corpus, config, eval));
  if (!r.report.records.empty()) row["final_nll"] = r.report.records.back().nll;
  return row;
}

SweepResult sweep(const std::vector<SweepCell>& grid, const Corpus& corpus, const TopicTree& tree,
                  const TrainConfig& base, const SweepOptions& options) {
  if (grid.empty()) throw UsageError("sweep: empty grid");
  if (options.seeds == 0) throw UsageError("sweep: need at least one seed");
  SweepResult result;
  for (const auto& c : grid) result.cells.push_back({c, std::vector<SweepRun>(options.seeds), {}});

  const std::size_t jobs = grid.size() * options.seeds;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      const std::size_t ci = j / options.seeds, si = j % options.seeds;
      SweepRun& run = result.cells[ci].runs[si];
      TrainConfig cfg = base;
      cfg.beta = grid[ci].beta;
      cfg.threshold = grid[ci].threshold;
      cfg.seed = base.seed + si;
      cfg.checkpoint_path.clear();
      cfg.checkpoint_every = 0;
      run.seed = cfg.seed;
      try {
        run.metrics = train_and_evaluate(corpus, tree, cfg, options.eval);
        run.ok = true;
      } catch (const Error& e) {
        run.error = std::string(e.kind()) + ": " + e.what();
      } catch (const std::exception& e) {
        run.error = std::string("internal: ") + e.what();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, jobs));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  for (auto& cell : result.cells) {
    std::map<std::string, std::vector<double>> values;
    for (const auto& run : cell.runs)
      if (run.ok)
        for (const auto& [k, v] : run.metrics) values[k].push_back(v);
    for (const auto& [k, vs] : values) {
      MetricSummary s;
      s.n = vs.size();
      for (double v : vs) s.mean += v;
      s.mean /= static_cast<double>(s.n);
      if (s.n > 1) {
        double ss = 0.0;
        for (double v : vs) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
      }
      cell.summary[k] = s;
    }
  }
  return result;
}

namespace {
std::string shortest(double v) {
  std::array<char, 32> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}
}  // namespace

std::string SweepResult::summary_csv() const {
  std::ostringstream os;
  os << std::setprecision(17) << "beta,threshold,metric,n,mean,std\n";
  for (const auto& c : cells)
    for (const auto& [k, s] : c.summary)
      os << shortest(c.cell.beta) << ',' << shortest(c.cell.threshold) << ',' << k << ',' << s.n << ',' << s.mean << ',' << s.stddev << '\n';
  return os.str();
}

std::string SweepResult::runs_csv() const {
  std::ostringstream os;
  os << std::setprecision(17) << "beta,threshold,seed,status,metric,value\n";
  for (const auto& c : cells) {
    for (const auto& r : c.runs) {
      if (!r.ok) {
        std::string msg = r.error;
        for (char& ch : msg)
          if (ch == ',' || ch == '\n') ch = ' ';
        os << shortest(c.cell.beta) << ',' << shortest(c.cell.threshold) << ',' << r.seed << ",failed,error," << msg << '\n';
        continue;
      }
      for (const auto& [k, v] : r.metrics)
        os << shortest(c.cell.beta) << ',' << shortest(c.cell.threshold) << ',' << r.seed << ",ok," << k << ',' << v << '\n';
    }
  }
  return os.str();
}

void SweepResult::write(const std::filesystem::path& summary_path, const std::filesystem::path& runs_path) const {
  std::ofstream s(summary_path), r(runs_path);
  if (!s) throw IoError("cannot write " + summary_path.string());
  if (!r) throw IoError("cannot write " + runs_path.string());
  s << summary_csv();
  r << runs_csv();
}

}  // namespace topickg
