#include "wks/model.hpp"

#include <cmath>
#include <string>

#include "wks/errors.hpp"

namespace wks::est {
namespace {

using nn::Tensor;

/// [B, L, C] -> [B, C, L]
Tensor to_channels_first(const Tensor& x) {
  const std::size_t B = x.dim(0), L = x.dim(1), C = x.dim(2);
  Tensor out({B, C, L});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t l = 0; l < L; ++l) {
      const double* src = x.data() + (b * L + l) * C;
      for (std::size_t c = 0; c < C; ++c) out.data()[(b * C + c) * L + l] = src[c];
    }
  }
  return out;
}

/// [B, C, L] -> [B, L, C]
Tensor to_channels_last(const Tensor& x) {
  const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
  Tensor out({B, L, C});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* src = x.data() + (b * C + c) * L;
      for (std::size_t l = 0; l < L; ++l) out.data()[(b * L + l) * C + c] = src[l];
    }
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (sensors == 0) throw ConfigError("model needs at least one sensor channel");
  if (pool == 0) throw ConfigError("pool size must be positive");
  if (conv1_kernel == 0 || conv2_kernel == 0) throw ConfigError("conv kernels must be positive");
  if (sl < conv1_kernel) throw ConfigError("sl " + std::to_string(sl) + " is shorter than the first conv kernel");
  if (pool1_out() < conv2_kernel) {
    throw ConfigError("sl " + std::to_string(sl) + " leaves " + std::to_string(pool1_out()) +
                      " samples after the first stage, shorter than the second conv kernel");
  }
  if (lstm_steps() == 0) {
    throw ConfigError("sl " + std::to_string(sl) + " collapses to zero sequence steps after the conv stages");
  }
  if (conv1_filters == 0 || conv2_filters == 0 || lstm_hidden == 0 || shared_width == 0) {
    throw ConfigError("layer widths must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (speed_classes < 2) throw ConfigError("need at least two speed classes");
  if (direction_classes < 2) throw ConfigError("need at least two direction classes");
}

std::size_t ModelConfig::matched_width() const {
  const std::size_t H = lstm_hidden, F = conv2_filters, S = shared_width;
  const std::size_t lstm_params = 2 * (4 * H * F + 4 * H * H + 4 * H);
  const std::size_t branch = lstm_params + 2 * H * S + S;
  const std::size_t per_unit = flatten_width() + 1 + S;
  const auto d = static_cast<std::size_t>(std::llround(
      static_cast<double>(branch - S) / static_cast<double>(per_unit)));
  return d > 0 ? d : 1;
}

Estimator::Estimator(const ModelConfig& config, nn::ParameterSet& params, Rng& init_rng)
    : config_(config),
      conv1_(params, "conv1", config.sensors, config.conv1_filters, config.conv1_kernel, init_rng),
      bn1_(params, "bn1", config.conv1_filters),
      pool1_(config.pool),
      conv2_(params, "conv2", config.conv1_filters, config.conv2_filters, config.conv2_kernel, init_rng),
      bn2_(params, "bn2", config.conv2_filters),
      pool2_(config.pool),
      dropout_(config.dropout) {
  config_.validate();
  std::size_t branch_width = 0;
  if (config_.cnn_only) {
    if (config_.cnn_only_width == 0) config_.cnn_only_width = config_.matched_width();
    branch_width = config_.cnn_only_width;
    reduce_.emplace(params, "reduce", config_.flatten_width(), branch_width, init_rng);
  } else {
    lstm_.emplace(params, "lstm", config_.conv2_filters, config_.lstm_hidden, init_rng);
    branch_width = 2 * config_.lstm_hidden;
  }
  shared_.emplace(params, "shared", branch_width, config_.shared_width, init_rng);
  head_x_.emplace(params, "head_x", config_.shared_width, 1, init_rng);
  head_v_.emplace(params, "head_v", config_.shared_width, config_.speed_classes, init_rng);
  head_d_.emplace(params, "head_d", config_.shared_width, config_.direction_classes, init_rng);
}

Output Estimator::forward(const Tensor& batch, nn::Mode mode, Rng* dropout_rng) {
  if (batch.rank() != 3 || batch.dim(1) != config_.sl || batch.dim(2) != config_.sensors) {
    throw std::invalid_argument("estimator input must be [B, sl, sensors]");
  }
  batch_ = batch.dim(0);

  Tensor a = to_channels_first(batch);
  a = conv1_.forward(a);
  a = bn1_.forward(a, mode);
  a = relu1_.forward(a);
  a = pool1_.forward(a);
  a = conv2_.forward(a);
  a = bn2_.forward(a, mode);
  a = relu2_.forward(a);
  a = pool2_.forward(a);  // [B, C2, L']

  Tensor r;
  if (config_.cnn_only) {
    Tensor flat = Tensor::from({batch_, config_.flatten_width()}, a.values());
    r = reduce_relu_.forward(reduce_->forward(flat));
  } else {
    const std::size_t T = config_.lstm_steps();
    const std::size_t H = config_.lstm_hidden;
    Tensor h_seq = lstm_->forward(to_channels_last(a));  // [B, T, 2H]
    r = Tensor({batch_, 2 * H});
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* fwd_last = h_seq.data() + (b * T + (T - 1)) * 2 * H;
      const double* bwd_last = h_seq.data() + (b * T + 0) * 2 * H + H;
      double* dst = r.data() + b * 2 * H;
      for (std::size_t j = 0; j < H; ++j) {
        dst[j] = fwd_last[j];
        dst[H + j] = bwd_last[j];
      }
    }
  }

  if (mode == nn::Mode::kTrain && !r.all_finite()) {
    throw TrainingDiverged("non-finite activations after the " +
                           std::string(config_.cnn_only ? "dense" : "recurrent") + " stage");
  }

  Tensor s = dropout_.forward(shared_relu_.forward(shared_->forward(r)), mode, dropout_rng);

  Output out;
  out.x = head_x_->forward(s);
  out.v_logits = head_v_->forward(s);
  out.d_logits = head_d_->forward(s);
  if (mode == nn::Mode::kTrain &&
      !(out.x.all_finite() && out.v_logits.all_finite() && out.d_logits.all_finite())) {
    throw TrainingDiverged("non-finite activations in the output heads");
  }
  return out;
}

void Estimator::backward(const Tensor& dx, const Tensor& dv_logits, const Tensor& dd_logits) {
  Tensor ds = head_x_->backward(dx);
  const Tensor ds_v = head_v_->backward(dv_logits);
  const Tensor ds_d = head_d_->backward(dd_logits);
  for (std::size_t i = 0; i < ds.numel(); ++i) ds[i] += ds_v[i] + ds_d[i];

  Tensor dr = shared_->backward(shared_relu_.backward(dropout_.backward(ds)));

  Tensor da;  // gradient at the pooled feature map [B, C2, L']
  if (config_.cnn_only) {
    Tensor dflat = reduce_->backward(reduce_relu_.backward(dr));
    da = Tensor::from({batch_, config_.conv2_filters, config_.lstm_steps()}, dflat.values());
  } else {
    const std::size_t T = config_.lstm_steps();
    const std::size_t H = config_.lstm_hidden;
    Tensor dh_seq({batch_, T, 2 * H});
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* src = dr.data() + b * 2 * H;
      double* fwd_last = dh_seq.data() + (b * T + (T - 1)) * 2 * H;
      double* bwd_last = dh_seq.data() + (b * T + 0) * 2 * H + H;
      for (std::size_t j = 0; j < H; ++j) {
        fwd_last[j] += src[j];
        bwd_last[j] += src[H + j];
      }
    }
    da = to_channels_first(lstm_->backward(dh_seq));
  }

  da = pool2_.backward(da);
  da = relu2_.backward(da);
  da = bn2_.backward(da);
  da = conv2_.backward(da);
  da = pool1_.backward(da);
  da = relu1_.backward(da);
  da = bn1_.backward(da);
  conv1_.backward(da);
}

void Estimator::freeze_dropout(bool frozen) { dropout_.freeze_mask(frozen); }

}  // namespace wks::est
