#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wks/wake_sim.hpp"

namespace wks::data {

/// sl consecutive debiased frames ending at `end_index` in the source trace.
struct Window {
  std::size_t sl = 0;
  std::size_t sensors = 0;
  std::vector<double> values;  // row-major [sl][sensors], Pa
  std::size_t end_index = 0;

  double at(std::size_t row, std::size_t sensor) const {
    return values[row * sensors + sensor];
  }
};

/// Label of one window: normalized displacement plus class indices.
struct MotionState {
  double x = 0.0;  // in [-1, 1]
  int v_class = 0;
  int d_class = 0;
};

struct LabeledSample {
  Window window;
  MotionState label;
};

/// Maps raw (speed, direction) truth onto class indices. Speeds are
/// matched exactly; this is labeling, not binning.
class LabelEncoder {
 public:
  explicit LabelEncoder(std::vector<double> speeds_mms);

  int encode_speed(double speed_mms) const;        // rank in ascending set
  static int encode_direction(sim::Direction d);   // P -> 0, N -> 1
  MotionState encode(const sim::GroundTruth& truth) const;

  const std::vector<double>& speeds() const { return speeds_; }
  int num_speed_classes() const { return static_cast<int>(speeds_.size()); }
  static constexpr int num_direction_classes() { return 2; }

 private:
  std::vector<double> speeds_;  // ascending
};

/// Per-sensor standardization statistics computed on the training split.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct LabeledDataset {
  std::size_t sl = 0;
  std::size_t sensors = 0;
  std::vector<LabeledSample> samples;
  std::vector<double> speed_set;
  double split_ratio = 0.9;
  std::uint64_t split_seed = 0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  NormStats norm;
  std::string config_hash;

  int num_speed_classes() const { return static_cast<int>(speed_set.size()); }
  static constexpr int num_direction_classes() { return 2; }
};

/// Subtracts each sensor's mean over the first `baseline_len` samples from
/// its whole series. Truth is untouched. Requires baseline_len in
/// [1, premotion_samples].
sim::PressureTrace debias(const sim::PressureTrace& trace, std::size_t baseline_len);

/// Drops samples with |x| > clip_mm and maps surviving x to x/clip_mm.
/// Requires a debiased trace; throws if nothing survives.
sim::PressureTrace clip_and_normalize(const sim::PressureTrace& trace,
                                      double clip_mm = 120.0);

struct WindowingResult {
  std::vector<LabeledSample> samples;
  bool trace_too_short = false;
};

/// Sliding windows of length sl advancing by stride; the label is the truth
/// at each window's final frame.
WindowingResult make_windows(const sim::PressureTrace& trace, std::size_t sl,
                             std::size_t stride, const LabelEncoder& encoder);

/// Deterministic stratified split: every (v, d) class contributes to both
/// partitions. Throws if any class has fewer than 2 samples.
void split(LabeledDataset& dataset, double ratio, std::uint64_t seed);

/// Standardization statistics over the training windows (per sensor).
NormStats compute_norm_stats(const LabeledDataset& dataset);

struct DatasetOptions {
  std::size_t sl = 64;
  std::size_t stride = 1;
  double clip_mm = 120.0;
  std::size_t baseline_len = 50;
  double split_ratio = 0.9;
  std::uint64_t split_seed = 0;
  std::vector<double> speeds_mms;  // label space; inferred from traces if empty
};

/// Full pipeline: debias -> clip/normalize -> window -> label -> split ->
/// standardize. `skipped_short` counts traces shorter than sl after clipping.
LabeledDataset build_dataset(const std::vector<sim::PressureTrace>& traces,
                             const DatasetOptions& options,
                             std::size_t* skipped_short = nullptr);

/// Binary container; round-trips all floating-point values exactly.
void write_dataset(const std::filesystem::path& path, const LabeledDataset& dataset);
LabeledDataset read_dataset(const std::filesystem::path& path);

}  // namespace wks::data
