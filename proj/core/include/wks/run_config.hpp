#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wks/model.hpp"
#include "wks/wake_sim.hpp"

namespace wks::cli {

/// Simulation grid and surrogate physics. Case 1 places the sensors at the
/// design longitudinal offset, case 2 farther downstream.
struct SimSection {
  double dt_s = 0.0025;
  double x_start_mm = -175.0;
  double x_end_mm = 175.0;
  std::size_t premotion_samples = 50;
  std::vector<double> speeds_mms{400.0, 500.0, 600.0, 700.0, 800.0};
  double y_case1_mm = 250.0;
  double y_case2_mm = 300.0;
  std::size_t repeats = 10;
  sim::SensorGeometry geometry;
  sim::WakeParams wake;
  sim::NoiseParams noise;
};

struct DataSection {
  std::size_t sl = 64;
  std::size_t stride = 1;
  double clip_mm = 120.0;
  std::size_t baseline_len = 50;
  double split_ratio = 0.9;
  std::string corpus_dir;  // empty: traces are simulated in memory
};

struct ModelSection {
  std::size_t conv1_filters = 32;
  std::size_t conv1_kernel = 5;
  std::size_t conv2_filters = 64;
  std::size_t conv2_kernel = 3;
  std::size_t pool = 2;
  std::size_t lstm_hidden = 64;
  std::size_t shared_width = 64;
  double dropout = 0.3;
  bool cnn_only = false;
};

struct TrainSection {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double lr = 1e-4;
  std::array<double, 3> lambda{1.0, 1.0, 1.0};
};

struct TuneSection {
  std::size_t population = 6;
  std::size_t iterations = 10;
  double spiral_b = 1.0;
  double lambda_min = 0.01;
  double lambda_max = 10.0;
  std::size_t proxy_epochs = 20;
  std::size_t baselines = 5;
};

struct AblateSection {
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

struct SweepSection {
  std::vector<std::size_t> sls{32, 48, 64, 80};
  std::vector<std::uint64_t> seeds;  // empty: the run seed alone
};

/// One config drives every subcommand; flags override single fields.
struct RunConfig {
  std::uint64_t seed = 0;
  int case_id = 1;
  SimSection sim;
  DataSection data;
  ModelSection model;
  TrainSection train;
  TuneSection tune;
  AblateSection ablate;
  SweepSection sweep;

  void validate() const;

  double case_y_mm() const { return case_id == 2 ? sim.y_case2_mm : sim.y_case1_mm; }
  /// Scenario template carrying everything except offset/speed/direction.
  sim::Scenario base_scenario() const;
  /// Model config with sl/sensors/classes resolved from data and sim.
  est::ModelConfig resolved_model() const;
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> sl;
  std::optional<int> case_id;
};

void apply_overrides(RunConfig& config, const CliOverrides& overrides);

/// Defaults overlaid with the file's values; unknown keys are rejected.
RunConfig load_config(const std::filesystem::path& path);
RunConfig config_from_json_text(const std::string& text);

/// Canonical pretty serialization (sorted keys).
std::string config_to_json_text(const RunConfig& config);
void save_config(const std::filesystem::path& path, const RunConfig& config);

/// 16-hex-digit FNV-1a of the canonical serialization.
std::string config_hash(const RunConfig& config);

/// Hash of the fields that determine corpus content (sim section + seed);
/// guards against pairing a run with a stale corpus directory.
std::string sim_hash(const RunConfig& config);

}  // namespace wks::cli
