#pragma once

#include <string>

#include "wks/params.hpp"
#include "wks/rng.hpp"
#include "wks/tensor.hpp"

namespace wks::nn {

/// One LSTM direction over a batched sequence [B, T, F] -> [B, T, H].
/// With `reverse` the sequence is processed back-to-front but outputs stay
/// aligned to the original time axis. States start at zero; gate order in
/// the stacked weights is input, forget, cell, output. Weights and biases
/// init uniform within 1/sqrt(H); the forget-gate bias is then set to 1.
class LstmDirection {
 public:
  LstmDirection(ParameterSet& params, const std::string& prefix, std::size_t input,
                std::size_t hidden, bool reverse, Rng& rng);

  Tensor forward(const Tensor& x);
  /// dh_seq holds the loss gradient w.r.t. every step's output (zero rows
  /// for unused steps); returns the gradient w.r.t. x.
  Tensor backward(const Tensor& dh_seq);

  std::size_t hidden() const { return hidden_; }

 private:
  std::size_t time_of(std::size_t step) const { return reverse_ ? steps_ - 1 - step : step; }

  Param* w_x_;  // [4H, F]
  Param* w_h_;  // [4H, H]
  Param* bias_;  // [4H]
  std::size_t input_, hidden_;
  bool reverse_;

  // caches, indexed by processing step
  std::size_t batch_ = 0, steps_ = 0;
  Tensor x_flat_;  // [B*T, F]
  Tensor i_, f_, g_, o_, c_, tanh_c_, h_;  // each [T, B, H]
};

/// Bidirectional LSTM: output [B, T, 2H] with the forward direction in
/// channels [0, H) and the backward direction in [H, 2H).
class BiLstm {
 public:
  BiLstm(ParameterSet& params, const std::string& prefix, std::size_t input,
         std::size_t hidden, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  std::size_t hidden() const { return fwd_.hidden(); }

 private:
  LstmDirection fwd_;
  LstmDirection bwd_;
};

}  // namespace wks::nn
