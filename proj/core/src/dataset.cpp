#include "wks/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>

#include "wks/errors.hpp"
#include "wks/rng.hpp"

namespace wks::data {
namespace {

constexpr char kMagic[8] = {'W', 'K', 'D', 'S', 'E', 'T', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

void write_f64(std::ostream& out, double value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

void write_i32(std::ostream& out, std::int32_t value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t value = 0;
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  return value;
}

double read_f64(std::istream& in) {
  double value = 0.0;
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  return value;
}

std::int32_t read_i32(std::istream& in) {
  std::int32_t value = 0;
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  return value;
}

}  // namespace

LabelEncoder::LabelEncoder(std::vector<double> speeds_mms) : speeds_(std::move(speeds_mms)) {
  if (speeds_.empty()) throw ConfigError("label encoder needs at least one speed");
  std::sort(speeds_.begin(), speeds_.end());
  speeds_.erase(std::unique(speeds_.begin(), speeds_.end()), speeds_.end());
}

int LabelEncoder::encode_speed(double speed_mms) const {
  for (std::size_t i = 0; i < speeds_.size(); ++i) {
    if (speeds_[i] == speed_mms) return static_cast<int>(i);
  }
  throw ConfigError("speed " + std::to_string(speed_mms) + " mm/s is not in the configured speed set");
}

int LabelEncoder::encode_direction(sim::Direction d) { return static_cast<int>(d); }

MotionState LabelEncoder::encode(const sim::GroundTruth& truth) const {
  MotionState state;
  state.x = truth.x;
  state.v_class = encode_speed(truth.speed_mms);
  state.d_class = encode_direction(truth.dir);
  return state;
}

sim::PressureTrace debias(const sim::PressureTrace& trace, std::size_t baseline_len) {
  if (baseline_len == 0) throw ConfigError("debias baseline length must be positive");
  if (baseline_len > trace.premotion_samples) {
    throw ConfigError("debias baseline length " + std::to_string(baseline_len) +
                      " exceeds the trace's " + std::to_string(trace.premotion_samples) +
                      " premotion samples");
  }
  sim::PressureTrace out = trace;
  const std::size_t sensors = trace.sensors();
  for (std::size_t s = 0; s < sensors; ++s) {
    double mean = 0.0;
    for (std::size_t i = 0; i < baseline_len; ++i) mean += trace.frames_pa[i][s];
    mean /= static_cast<double>(baseline_len);
    for (auto& frame : out.frames_pa) frame[s] -= mean;
  }
  return out;
}

sim::PressureTrace clip_and_normalize(const sim::PressureTrace& trace, double clip_mm) {
  if (!(clip_mm > 0.0)) throw ConfigError("clip range must be positive");
  sim::PressureTrace out;
  out.premotion_samples = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const sim::GroundTruth& truth = trace.truth[i];
    if (std::abs(truth.x) > clip_mm) continue;
    out.times_s.push_back(trace.times_s[i]);
    out.frames_pa.push_back(trace.frames_pa[i]);
    sim::GroundTruth scaled = truth;
    scaled.x = truth.x / clip_mm;
    out.truth.push_back(scaled);
    if (i < trace.premotion_samples) ++out.premotion_samples;
  }
  if (out.frames_pa.empty()) {
    throw std::runtime_error("clipping removed every sample; check the sweep range against the clip range");
  }
  return out;
}

WindowingResult make_windows(const sim::PressureTrace& trace, std::size_t sl,
                             std::size_t stride, const LabelEncoder& encoder) {
  if (sl == 0) throw ConfigError("window length must be positive");
  if (stride == 0) throw ConfigError("window stride must be positive");
  WindowingResult result;
  if (trace.size() < sl) {
    result.trace_too_short = true;
    return result;
  }
  const std::size_t sensors = trace.sensors();
  for (std::size_t start = 0; start + sl <= trace.size(); start += stride) {
    LabeledSample sample;
    sample.window.sl = sl;
    sample.window.sensors = sensors;
    sample.window.end_index = start + sl - 1;
    sample.window.values.resize(sl * sensors);
    for (std::size_t r = 0; r < sl; ++r) {
      for (std::size_t s = 0; s < sensors; ++s) {
        sample.window.values[r * sensors + s] = trace.frames_pa[start + r][s];
      }
    }
    sample.label = encoder.encode(trace.truth[sample.window.end_index]);
    result.samples.push_back(std::move(sample));
  }
  return result;
}

void split(LabeledDataset& dataset, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie strictly between 0 and 1");
  dataset.split_ratio = ratio;
  dataset.split_seed = seed;
  dataset.train_indices.clear();
  dataset.test_indices.clear();

  std::map<std::pair<int, int>, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const MotionState& label = dataset.samples[i].label;
    by_class[{label.v_class, label.d_class}].push_back(i);
  }

  Rng rng(seed);
  for (auto& [key, indices] : by_class) {
    const std::size_t n = indices.size();
    if (n < 2) {
      throw std::runtime_error("class (v=" + std::to_string(key.first) + ", d=" +
                               std::to_string(key.second) +
                               ") has fewer than 2 windows; cannot split");
    }
    std::size_t n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * (1.0 - ratio)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    rng.shuffle(indices);
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n - n_test) {
        dataset.train_indices.push_back(indices[i]);
      } else {
        dataset.test_indices.push_back(indices[i]);
      }
    }
  }
  std::sort(dataset.train_indices.begin(), dataset.train_indices.end());
  std::sort(dataset.test_indices.begin(), dataset.test_indices.end());
}

NormStats compute_norm_stats(const LabeledDataset& dataset) {
  NormStats stats;
  stats.mean.assign(dataset.sensors, 0.0);
  stats.stddev.assign(dataset.sensors, 1.0);
  if (dataset.train_indices.empty()) throw std::runtime_error("cannot standardize: empty training split");

  std::vector<double> sum(dataset.sensors, 0.0);
  std::vector<double> sum_sq(dataset.sensors, 0.0);
  std::size_t count = 0;
  for (std::size_t idx : dataset.train_indices) {
    const Window& w = dataset.samples[idx].window;
    for (std::size_t r = 0; r < w.sl; ++r) {
      for (std::size_t s = 0; s < w.sensors; ++s) {
        const double v = w.at(r, s);
        sum[s] += v;
        sum_sq[s] += v * v;
      }
    }
    count += dataset.samples[idx].window.sl;
  }
  for (std::size_t s = 0; s < dataset.sensors; ++s) {
    const double mean = sum[s] / static_cast<double>(count);
    const double var = sum_sq[s] / static_cast<double>(count) - mean * mean;
    stats.mean[s] = mean;
    const double sd = std::sqrt(std::max(var, 0.0));
    stats.stddev[s] = sd > 0.0 ? sd : 1.0;
  }
  return stats;
}

LabeledDataset build_dataset(const std::vector<sim::PressureTrace>& traces,
                             const DatasetOptions& options, std::size_t* skipped_short) {
  if (traces.empty()) throw std::runtime_error("cannot build a dataset from zero traces");

  std::vector<double> speeds = options.speeds_mms;
  if (speeds.empty()) {
    std::set<double> seen;
    for (const auto& trace : traces) {
      if (!trace.truth.empty()) seen.insert(trace.truth.front().speed_mms);
    }
    speeds.assign(seen.begin(), seen.end());
  }
  LabelEncoder encoder(speeds);

  LabeledDataset dataset;
  dataset.sl = options.sl;
  dataset.sensors = traces.front().sensors();
  dataset.speed_set = encoder.speeds();

  std::size_t skipped = 0;
  for (const auto& trace : traces) {
    if (trace.sensors() != dataset.sensors) {
      throw std::runtime_error("traces disagree on sensor count");
    }
    sim::PressureTrace prepared = clip_and_normalize(debias(trace, options.baseline_len), options.clip_mm);
    WindowingResult windows = make_windows(prepared, options.sl, options.stride, encoder);
    if (windows.trace_too_short) {
      ++skipped;
      continue;
    }
    for (auto& sample : windows.samples) dataset.samples.push_back(std::move(sample));
  }
  if (skipped_short != nullptr) *skipped_short = skipped;
  if (dataset.samples.empty()) {
    throw std::runtime_error("no trace survived windowing; lower sl or raise the sampling rate");
  }

  split(dataset, options.split_ratio, options.split_seed);
  dataset.norm = compute_norm_stats(dataset);
  return dataset;
}

void write_dataset(const std::filesystem::path& path, const LabeledDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, dataset.sl);
  write_u64(out, dataset.sensors);
  write_u64(out, dataset.samples.size());
  write_f64(out, dataset.split_ratio);
  write_u64(out, dataset.split_seed);

  write_u64(out, dataset.speed_set.size());
  for (double s : dataset.speed_set) write_f64(out, s);

  for (double m : dataset.norm.mean) write_f64(out, m);
  for (double s : dataset.norm.stddev) write_f64(out, s);

  write_u64(out, dataset.config_hash.size());
  out.write(dataset.config_hash.data(), static_cast<std::streamsize>(dataset.config_hash.size()));

  write_u64(out, dataset.train_indices.size());
  for (std::size_t i : dataset.train_indices) write_u64(out, i);
  write_u64(out, dataset.test_indices.size());
  for (std::size_t i : dataset.test_indices) write_u64(out, i);

  for (const auto& sample : dataset.samples) {
    write_u64(out, sample.window.end_index);
    write_f64(out, sample.label.x);
    write_i32(out, sample.label.v_class);
    write_i32(out, sample.label.d_class);
    out.write(reinterpret_cast<const char*>(sample.window.values.data()),
              static_cast<std::streamsize>(sample.window.values.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed while writing " + path.string());
}

LabeledDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a dataset file");
  }
  LabeledDataset dataset;
  dataset.sl = read_u64(in);
  dataset.sensors = read_u64(in);
  const std::uint64_t n_samples = read_u64(in);
  dataset.split_ratio = read_f64(in);
  dataset.split_seed = read_u64(in);

  dataset.speed_set.resize(read_u64(in));
  for (double& s : dataset.speed_set) s = read_f64(in);

  dataset.norm.mean.resize(dataset.sensors);
  dataset.norm.stddev.resize(dataset.sensors);
  for (double& m : dataset.norm.mean) m = read_f64(in);
  for (double& s : dataset.norm.stddev) s = read_f64(in);

  dataset.config_hash.resize(read_u64(in));
  in.read(dataset.config_hash.data(), static_cast<std::streamsize>(dataset.config_hash.size()));

  dataset.train_indices.resize(read_u64(in));
  for (std::size_t& i : dataset.train_indices) i = read_u64(in);
  dataset.test_indices.resize(read_u64(in));
  for (std::size_t& i : dataset.test_indices) i = read_u64(in);

  dataset.samples.resize(n_samples);
  for (auto& sample : dataset.samples) {
    sample.window.sl = dataset.sl;
    sample.window.sensors = dataset.sensors;
    sample.window.end_index = read_u64(in);
    sample.label.x = read_f64(in);
    sample.label.v_class = read_i32(in);
    sample.label.d_class = read_i32(in);
    sample.window.values.resize(dataset.sl * dataset.sensors);
    in.read(reinterpret_cast<char*>(sample.window.values.data()),
            static_cast<std::streamsize>(sample.window.values.size() * sizeof(double)));
  }
  if (!in) throw std::runtime_error("truncated dataset file " + path.string());
  return dataset;
}

}  // namespace wks::data
