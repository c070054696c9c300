#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "wks/dataset.hpp"
#include "wks/model.hpp"
#include "wks/trainer.hpp"

namespace wks::opt {

struct WoaConfig {
  std::size_t population = 6;
  std::size_t iterations = 10;
  double spiral_b = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> lower;
  std::vector<double> upper;

  void validate() const;
  std::size_t dims() const { return lower.size(); }
};

/// Population state after one iteration (entry 0 is the initial sample).
struct WoaIteration {
  std::size_t iteration = 0;
  std::vector<std::vector<double>> positions;
  std::vector<double> fitness;
  std::vector<double> best;
  double best_fitness = 0.0;
};

struct WoaResult {
  std::vector<double> best;
  double best_fitness = 0.0;
  std::vector<WoaIteration> trace;
  std::size_t evaluations = 0;  // objective calls (cache misses)
  std::size_t cache_hits = 0;
};

/// Shrinking-encirclement move toward the current best.
std::vector<double> encircle_step(const std::vector<double>& x, const std::vector<double>& best,
                                  double a_coef, double c_coef);

/// Logarithmic spiral toward the best; l in [-1, 1].
std::vector<double> spiral_step(const std::vector<double>& x, const std::vector<double>& best,
                                double b, double l);

void clamp_to_bounds(std::vector<double>& x, const std::vector<double>& lower,
                     const std::vector<double>& upper);

/// Whale optimization (minimization). Positions are clamped to the bounds
/// after every move; non-finite positions are resampled uniformly.
/// Objective values are cached on positions quantized to 1e-4, so
/// revisited points cost nothing.
WoaResult woa_optimize(const std::function<double(const std::vector<double>&)>& objective,
                       const WoaConfig& config);

struct TuneConfig {
  WoaConfig woa;  // empty bounds -> [0.01, 10]^3
  est::TrainConfig train;
  est::ModelConfig model;
  std::uint64_t model_seed = 0;
  /// Observer for each objective evaluation (cache misses only):
  /// lambda, fitness, wall-clock seconds.
  std::function<void(const std::vector<double>&, double, double)> on_evaluation;
};

struct TuneResult {
  std::array<double, 3> best_lambda{1.0, 1.0, 1.0};
  double best_fitness = 0.0;
  est::Metrics best_metrics;
  WoaResult woa;
};

/// Tunes the three task weights. Every objective call trains a fresh
/// model from the same seeds, so the objective is a deterministic
/// function of lambda; fitness is measured on the test split.
TuneResult tune_task_weights(const data::LabeledDataset& dataset, const TuneConfig& config);

}  // namespace wks::opt
