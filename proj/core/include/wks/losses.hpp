#pragma once

#include <vector>

#include "wks/tensor.hpp"

namespace wks::nn {

/// Mean squared error between a [B, 1] prediction column and targets.
/// If grad is non-null it receives d(loss)/d(pred), already averaged.
double mse_loss(const Tensor& pred, const std::vector<double>& targets, Tensor* grad);

/// Row-wise softmax of [B, K] logits.
Tensor softmax(const Tensor& logits);

/// Mean negative log-likelihood of [B, K] logits against class labels,
/// computed via log-sum-exp. grad (if non-null) receives
/// (softmax - onehot)/B; probs_out (if non-null) the softmax rows.
double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* grad, Tensor* probs_out = nullptr);

}  // namespace wks::nn
