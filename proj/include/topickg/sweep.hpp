#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "topickg/config.hpp"
#include "topickg/corpus.hpp"
#include "topickg/evaluate.hpp"
#include "topickg/taxonomy.hpp"

namespace topickg {

struct SweepCell {
  double beta = 50.0;
  double threshold = 0.4;
};

/// Flat metric name -> value, e.g. tc.1, td.2, we.1, micro_f1, final_nll.
using MetricRow = std::map<std::string, double>;

struct SweepRun {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // "<kind>: <message>" when !ok
  MetricRow metrics;
};

struct MetricSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 when n < 2
};

struct SweepCellResult {
  SweepCell cell;
  std::vector<SweepRun> runs;
  std::map<std::string, MetricSummary> summary;  // over successful runs
};

struct SweepResult {
  std::vector<SweepCellResult> cells;

  /// beta,threshold,metric,n,mean,std
  std::string summary_csv() const;
  /// beta,threshold,seed,status,metric,value
  std::string runs_csv() const;
  void write(const std::filesystem::path& summary_path, const std::filesystem::path& runs_path) const;
};

struct SweepOptions {
  std::size_t seeds = 5;
  std::size_t workers = 1;
  EvalOptions eval;
};

/// Trains and evaluates every (cell, seed) pair. Seed i of every cell is
/// base.seed + i, so results do not depend on cell order. A failing run is
/// recorded and the sweep moves on.
SweepResult sweep(const std::vector<SweepCell>& grid, const Corpus& corpus, const TopicTree& tree,
                  const TrainConfig& base, const SweepOptions& options = {});

/// The same metrics a sweep records, for a single train + eval.
MetricRow train_and_evaluate(const Corpus& corpus, const TopicTree& tree, const TrainConfig& config,
                             const EvalOptions& eval = {});

MetricRow metric_row(const EvalMetrics& m);

}  // namespace topickg
