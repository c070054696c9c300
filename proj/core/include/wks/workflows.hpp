#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "wks/run_config.hpp"
#include "wks/trainer.hpp"
#include "wks/woa.hpp"

namespace wks::cli {

/// Scenario grid for one case (or both when unfiltered): offsets x speeds
/// x directions, repeats applied later by the corpus generator.
std::vector<sim::Scenario> scenario_grid_for(const RunConfig& config,
                                             std::optional<int> case_filter);

/// Traces for the given case: simulated in memory, or loaded from
/// config.data.corpus_dir (a `gen` output) when that is set.
std::vector<sim::PressureTrace> corpus_for(const RunConfig& config,
                                           std::optional<int> case_filter);

/// Full pipeline to a split, standardized dataset for config.case_id.
data::LabeledDataset dataset_for(const RunConfig& config,
                                 std::size_t* skipped_short = nullptr);

struct GenOutcome {
  std::size_t traces = 0;
  std::string manifest_hash;
  std::filesystem::path manifest_path;
};
GenOutcome cmd_gen(const RunConfig& config, const std::filesystem::path& out,
                   std::optional<int> case_filter);

struct TrainOutcome {
  est::Metrics metrics;
  est::TrainHistory history;
  double fitness = 0.0;
  std::size_t windows = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::size_t skipped_traces = 0;
};
TrainOutcome cmd_train(const RunConfig& config, const std::filesystem::path& out);

struct EvalOutcome {
  est::Metrics metrics;
  bool matches_stored = false;
};
/// Re-evaluates a train run from its persisted config, dataset, and
/// checkpoint; throws if the stored metrics are not reproduced exactly.
EvalOutcome cmd_eval(const std::filesystem::path& run_dir);

struct TuneOutcome {
  std::array<double, 3> best_lambda{1.0, 1.0, 1.0};
  double search_fitness = 0.0;       // proxy-training fitness of the best agent
  double tuned_full_fitness = 0.0;   // full retrain at the tuned weights
  std::vector<double> baseline_fitness;
  double baseline_median = 0.0;
  bool tuned_le_median = false;
  std::size_t evaluations = 0;
  std::size_t cache_hits = 0;
};
TuneOutcome cmd_tune(const RunConfig& config, const std::filesystem::path& out);

struct AblateRow {
  std::uint64_t seed = 0;
  est::Metrics hybrid;
  est::Metrics cnn_only;
};
struct AblateOutcome {
  std::vector<AblateRow> rows;
  double mean_fitness_hybrid = 0.0;
  double mean_fitness_cnn_only = 0.0;
  bool hybrid_not_worse = false;
};
AblateOutcome cmd_ablate(const RunConfig& config, const std::filesystem::path& out);

struct SweepRow {
  std::size_t sl = 0;
  std::uint64_t seed = 0;
  est::Metrics metrics;
  double fitness = 0.0;
};
struct SweepOutcome {
  std::vector<SweepRow> rows;  // sorted by sl, then seed
  std::vector<std::pair<std::size_t, double>> mean_fitness_by_sl;
};
SweepOutcome cmd_sweep_seqlen(const RunConfig& config, const std::filesystem::path& out);

struct ReportOutcome {
  std::size_t runs = 0;
  std::filesystem::path summary_path;
};
ReportOutcome cmd_report(const std::vector<std::filesystem::path>& run_dirs,
                         const std::filesystem::path& out);

}  // namespace wks::cli
