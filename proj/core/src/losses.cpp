#include "wks/losses.hpp"

#include <cassert>
#include <cmath>

namespace wks::nn {

double mse_loss(const Tensor& pred, const std::vector<double>& targets, Tensor* grad) {
  assert(pred.rank() == 2 && pred.dim(1) == 1 && pred.dim(0) == targets.size());
  const std::size_t batch = pred.dim(0);
  if (grad != nullptr) *grad = Tensor(pred.shape());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double err = pred[b] - targets[b];
    loss += err * err;
    if (grad != nullptr) (*grad)[b] = 2.0 * err / static_cast<double>(batch);
  }
  return loss / static_cast<double>(batch);
}

Tensor softmax(const Tensor& logits) {
  assert(logits.rank() == 2);
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  Tensor probs(logits.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const double* z = logits.data() + b * classes;
    double* p = probs.data() + b * classes;
    double max = z[0];
    for (std::size_t k = 1; k < classes; ++k) max = std::max(max, z[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      p[k] = std::exp(z[k] - max);
      sum += p[k];
    }
    for (std::size_t k = 0; k < classes; ++k) p[k] /= sum;
  }
  return probs;
}

double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* grad, Tensor* probs_out) {
  assert(logits.rank() == 2 && logits.dim(0) == labels.size());
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  Tensor probs = softmax(logits);

  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* z = logits.data() + b * classes;
    const int label = labels[b];
    assert(label >= 0 && static_cast<std::size_t>(label) < classes);
    double max = z[0];
    for (std::size_t k = 1; k < classes; ++k) max = std::max(max, z[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(z[k] - max);
    loss += std::log(sum) - (z[label] - max);
  }
  loss /= static_cast<double>(batch);

  if (grad != nullptr) {
    *grad = probs;
    for (std::size_t b = 0; b < batch; ++b) {
      (*grad)[b * classes + static_cast<std::size_t>(labels[b])] -= 1.0;
    }
    for (std::size_t i = 0; i < grad->numel(); ++i) (*grad)[i] /= static_cast<double>(batch);
  }
  if (probs_out != nullptr) *probs_out = std::move(probs);
  return loss;
}

}  // namespace wks::nn
