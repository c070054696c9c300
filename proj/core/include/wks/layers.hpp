#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wks/params.hpp"
#include "wks/rng.hpp"
#include "wks/tensor.hpp"

namespace wks::nn {

enum class Mode { kTrain, kEval };

/// Valid (no padding) 1-D convolution over [B, C_in, L] -> [B, C_out, L-k+1].
/// Weight layout [C_out, C_in, k]; Kaiming-uniform init, zero bias.
class Conv1d {
 public:
  Conv1d(ParameterSet& params, const std::string& prefix, std::size_t in_channels,
         std::size_t out_channels, std::size_t kernel, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  std::size_t out_length(std::size_t in_length) const { return in_length - kernel_ + 1; }

 private:
  Param* weight_;
  Param* bias_;
  std::size_t in_channels_, out_channels_, kernel_;
  Tensor cols_;  // im2col cache [C_in*k, B*L_out]
  std::size_t batch_ = 0, in_length_ = 0;
};

/// Per-channel batch normalization over [B, C, L]; statistics are taken
/// across batch and length. Running stats use momentum 0.1 and the
/// unbiased variance; normalization uses the biased one.
class BatchNorm1d {
 public:
  BatchNorm1d(ParameterSet& params, const std::string& prefix, std::size_t channels);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& dy);

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  Param* gamma_;
  Param* beta_;
  Param* running_mean_;
  Param* running_var_;
  std::size_t channels_;
  Tensor x_hat_;                 // cache [B, C, L]
  std::vector<double> inv_std_;  // per channel
};

/// Non-overlapping max pooling over the length axis; ties keep the first
/// index. Trailing remainder samples are dropped.
class MaxPool1d {
 public:
  explicit MaxPool1d(std::size_t kernel) : kernel_(kernel) {}

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  std::size_t out_length(std::size_t in_length) const { return in_length / kernel_; }

 private:
  std::size_t kernel_;
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> in_shape_;
};

/// Fully connected [B, in] -> [B, out]; weight [out, in].
class Dense {
 public:
  Dense(ParameterSet& params, const std::string& prefix, std::size_t in_features,
        std::size_t out_features, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  Param* weight_;
  Param* bias_;
  std::size_t in_features_, out_features_;
  Tensor x_;  // cache
};

class ReLU {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  std::vector<bool> active_;
};

/// Inverted dropout: train mode scales kept units by 1/(1-p); eval mode is
/// the identity. A frozen mask (for finite-difference checks) is reused
/// across calls instead of redrawing.
class Dropout {
 public:
  explicit Dropout(double p) : p_(p) {}

  Tensor forward(const Tensor& x, Mode mode, Rng* rng);
  Tensor backward(const Tensor& dy);

  void freeze_mask(bool frozen) { frozen_ = frozen; }
  double rate() const { return p_; }

 private:
  double p_;
  bool frozen_ = false;
  std::vector<double> mask_;
};

}  // namespace wks::nn
