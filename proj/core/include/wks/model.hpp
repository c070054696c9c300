#pragma once

#include <cstdint>
#include <optional>

#include "wks/layers.hpp"
#include "wks/lstm.hpp"
#include "wks/params.hpp"
#include "wks/rng.hpp"
#include "wks/tensor.hpp"

namespace wks::est {

/// Architecture of the multi-output estimator. Defaults follow the study
/// configuration for sl = 64 / 3 sensors / 5 speed classes.
struct ModelConfig {
  std::size_t sl = 64;
  std::size_t sensors = 3;
  std::size_t conv1_filters = 32;
  std::size_t conv1_kernel = 5;
  std::size_t conv2_filters = 64;
  std::size_t conv2_kernel = 3;
  std::size_t pool = 2;
  std::size_t lstm_hidden = 64;
  std::size_t shared_width = 64;
  double dropout = 0.3;
  std::size_t speed_classes = 5;
  std::size_t direction_classes = 2;
  bool cnn_only = false;
  std::size_t cnn_only_width = 0;  // 0 -> matched to the recurrent branch's budget

  void validate() const;

  std::size_t conv1_out() const { return sl - conv1_kernel + 1; }
  std::size_t pool1_out() const { return conv1_out() / pool; }
  std::size_t conv2_out() const { return pool1_out() - conv2_kernel + 1; }
  /// Sequence length seen by the BiLSTM after both conv/pool stages.
  std::size_t lstm_steps() const { return conv2_out() / pool; }
  std::size_t flatten_width() const { return conv2_filters * lstm_steps(); }

  /// Dense width d for the CNN-only ablation chosen so that replacing the
  /// BiLSTM keeps the total parameter count within a fraction of a percent.
  std::size_t matched_width() const;
};

struct Output {
  nn::Tensor x;         // [B, 1]
  nn::Tensor v_logits;  // [B, speed_classes]
  nn::Tensor d_logits;  // [B, direction_classes]
};

/// Two conv/BN/pool stages feeding either a BiLSTM (final state of each
/// direction read out) or a matched-width dense layer, then a shared dense
/// layer with dropout and three output heads. Static graph: backward must
/// follow a forward with the same batch.
class Estimator {
 public:
  Estimator(const ModelConfig& config, nn::ParameterSet& params, Rng& init_rng);

  /// batch: [B, sl, sensors], already standardized.
  Output forward(const nn::Tensor& batch, nn::Mode mode, Rng* dropout_rng = nullptr);

  /// Head gradients in; parameter gradients are accumulated in the set.
  void backward(const nn::Tensor& dx, const nn::Tensor& dv_logits, const nn::Tensor& dd_logits);

  void freeze_dropout(bool frozen);
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  nn::Conv1d conv1_;
  nn::BatchNorm1d bn1_;
  nn::ReLU relu1_;
  nn::MaxPool1d pool1_;
  nn::Conv1d conv2_;
  nn::BatchNorm1d bn2_;
  nn::ReLU relu2_;
  nn::MaxPool1d pool2_;
  std::optional<nn::BiLstm> lstm_;
  std::optional<nn::Dense> reduce_;  // cnn-only replacement for the BiLSTM
  nn::ReLU reduce_relu_;
  std::optional<nn::Dense> shared_;
  nn::ReLU shared_relu_;
  nn::Dropout dropout_;
  std::optional<nn::Dense> head_x_;
  std::optional<nn::Dense> head_v_;
  std::optional<nn::Dense> head_d_;
  std::size_t batch_ = 0;
};

}  // namespace wks::est
