#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "wks/dataset.hpp"
#include "wks/model.hpp"
#include "wks/params.hpp"

namespace wks::est {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  nn::AdamConfig adam;
  /// Task weights: displacement, speed class, direction class.
  std::array<double, 3> lambda{1.0, 1.0, 1.0};
  std::uint64_t seed = 0;
  std::ostream* log = nullptr;
  std::size_t log_every = 10;
};

struct EpochStats {
  double total = 0.0;
  double l1 = 0.0;  // displacement mse
  double l2 = 0.0;  // speed cross-entropy
  double l3 = 0.0;  // direction cross-entropy
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  bool diverged = false;
  /// Number of epochs whose updates survive in the parameters; on
  /// divergence the trainer rolls back to the end of this epoch.
  std::size_t completed_epochs = 0;
};

struct Metrics {
  double rmse_x = 0.0;  // in normalized displacement units
  double acc_v = 0.0;
  double acc_d = 0.0;
  std::vector<std::size_t> confusion_v;  // [K*K], row-major, row = truth
  std::vector<std::size_t> confusion_d;  // [2*2]
  std::size_t count = 0;
  std::size_t speed_classes = 0;
};

/// Scalar tuning objective: misclassification of both heads plus rmse.
double fitness(const Metrics& metrics);

/// Standardizes windows with the dataset's train statistics and assembles
/// the batch `indices[begin, end)` plus its targets.
void fill_batch(const data::LabeledDataset& dataset, const std::vector<std::size_t>& indices,
                std::size_t begin, std::size_t end, nn::Tensor& x, std::vector<double>& tx,
                std::vector<int>& tv, std::vector<int>& td);

/// Mini-batch Adam training on the dataset's train split. Seeded shuffle
/// and dropout streams; a non-finite loss or parameter rolls the model
/// back to the last finished epoch and stops.
TrainHistory train(Estimator& model, nn::ParameterSet& params,
                   const data::LabeledDataset& dataset, const TrainConfig& config);

/// Eval-mode metrics over the given sample indices.
Metrics evaluate(Estimator& model, const data::LabeledDataset& dataset,
                 const std::vector<std::size_t>& indices, std::size_t batch_size = 256);

}  // namespace wks::est
