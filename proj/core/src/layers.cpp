#include "wks/layers.hpp"

#include <Eigen/Core>

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace wks::nn {
namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using CMapRM = Eigen::Map<const MatrixRM>;

double kaiming_bound(std::size_t fan_in) {
  return std::sqrt(6.0 / static_cast<double>(fan_in));
}

}  // namespace

Conv1d::Conv1d(ParameterSet& params, const std::string& prefix, std::size_t in_channels,
               std::size_t out_channels, std::size_t kernel, Rng& rng)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel) {
  const double bound = kaiming_bound(in_channels * kernel);
  weight_ = &params.add(prefix + ".weight",
                        Tensor::uniform({out_channels, in_channels, kernel}, bound, rng));
  bias_ = &params.add(prefix + ".bias", Tensor({out_channels}));
}

Tensor Conv1d::forward(const Tensor& x) {
  assert(x.rank() == 3 && x.dim(1) == in_channels_);
  batch_ = x.dim(0);
  in_length_ = x.dim(2);
  if (in_length_ < kernel_) throw std::invalid_argument("conv input shorter than kernel");
  const std::size_t l_out = out_length(in_length_);
  const std::size_t patch = in_channels_ * kernel_;

  cols_ = Tensor({patch, batch_ * l_out});
  for (std::size_t c = 0; c < in_channels_; ++c) {
    for (std::size_t t = 0; t < kernel_; ++t) {
      double* row = cols_.data() + (c * kernel_ + t) * batch_ * l_out;
      for (std::size_t b = 0; b < batch_; ++b) {
        const double* src = x.data() + (b * in_channels_ + c) * in_length_ + t;
        double* dst = row + b * l_out;
        for (std::size_t j = 0; j < l_out; ++j) dst[j] = src[j];
      }
    }
  }

  CMapRM w(weight_->value.data(), static_cast<Eigen::Index>(out_channels_),
           static_cast<Eigen::Index>(patch));
  CMapRM k(cols_.data(), static_cast<Eigen::Index>(patch),
           static_cast<Eigen::Index>(batch_ * l_out));
  MatrixRM y = w * k;

  Tensor out({batch_, out_channels_, l_out});
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t co = 0; co < out_channels_; ++co) {
      const double bias = bias_->value[co];
      const double* src = y.data() + co * batch_ * l_out + b * l_out;
      double* dst = out.data() + (b * out_channels_ + co) * l_out;
      for (std::size_t j = 0; j < l_out; ++j) dst[j] = src[j] + bias;
    }
  }
  return out;
}

Tensor Conv1d::backward(const Tensor& dy) {
  const std::size_t l_out = out_length(in_length_);
  assert(dy.rank() == 3 && dy.dim(0) == batch_ && dy.dim(1) == out_channels_ &&
         dy.dim(2) == l_out);
  const std::size_t patch = in_channels_ * kernel_;

  MatrixRM dy_mat(out_channels_, batch_ * l_out);
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t co = 0; co < out_channels_; ++co) {
      const double* src = dy.data() + (b * out_channels_ + co) * l_out;
      double* dst = dy_mat.data() + co * batch_ * l_out + b * l_out;
      for (std::size_t j = 0; j < l_out; ++j) dst[j] = src[j];
    }
  }

  CMapRM k(cols_.data(), static_cast<Eigen::Index>(patch),
           static_cast<Eigen::Index>(batch_ * l_out));
  MapRM dw(weight_->grad.data(), static_cast<Eigen::Index>(out_channels_),
           static_cast<Eigen::Index>(patch));
  dw.noalias() += dy_mat * k.transpose();
  for (std::size_t co = 0; co < out_channels_; ++co) {
    bias_->grad[co] += dy_mat.row(static_cast<Eigen::Index>(co)).sum();
  }

  CMapRM w(weight_->value.data(), static_cast<Eigen::Index>(out_channels_),
           static_cast<Eigen::Index>(patch));
  MatrixRM dcols = w.transpose() * dy_mat;

  Tensor dx({batch_, in_channels_, in_length_});
  for (std::size_t c = 0; c < in_channels_; ++c) {
    for (std::size_t t = 0; t < kernel_; ++t) {
      const double* row = dcols.data() + (c * kernel_ + t) * batch_ * l_out;
      for (std::size_t b = 0; b < batch_; ++b) {
        const double* src = row + b * l_out;
        double* dst = dx.data() + (b * in_channels_ + c) * in_length_ + t;
        for (std::size_t j = 0; j < l_out; ++j) dst[j] += src[j];
      }
    }
  }
  return dx;
}

BatchNorm1d::BatchNorm1d(ParameterSet& params, const std::string& prefix, std::size_t channels)
    : channels_(channels) {
  gamma_ = &params.add(prefix + ".gamma", Tensor::full({channels}, 1.0));
  beta_ = &params.add(prefix + ".beta", Tensor({channels}));
  running_mean_ = &params.add(prefix + ".running_mean", Tensor({channels}), false);
  running_var_ = &params.add(prefix + ".running_var", Tensor::full({channels}, 1.0), false);
}

Tensor BatchNorm1d::forward(const Tensor& x, Mode mode) {
  assert(x.rank() == 3 && x.dim(1) == channels_);
  const std::size_t batch = x.dim(0);
  const std::size_t length = x.dim(2);
  if (mode == Mode::kTrain && batch * length < 2) {
    throw std::invalid_argument("batchnorm in train mode needs more than one value per channel");
  }
  Tensor out(x.shape());

  if (mode == Mode::kEval) {
    x_hat_ = Tensor();  // backward is train-only
    for (std::size_t c = 0; c < channels_; ++c) {
      const double scale = gamma_->value[c] / std::sqrt(running_var_->value[c] + kEps);
      const double shift = beta_->value[c] - scale * running_mean_->value[c];
      for (std::size_t b = 0; b < batch; ++b) {
        const double* src = x.data() + (b * channels_ + c) * length;
        double* dst = out.data() + (b * channels_ + c) * length;
        for (std::size_t l = 0; l < length; ++l) dst[l] = scale * src[l] + shift;
      }
    }
    return out;
  }

  const double n = static_cast<double>(batch * length);
  x_hat_ = Tensor(x.shape());
  inv_std_.assign(channels_, 0.0);
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const double* src = x.data() + (b * channels_ + c) * length;
      for (std::size_t l = 0; l < length; ++l) {
        sum += src[l];
        sum_sq += src[l] * src[l];
      }
    }
    const double mean = sum / n;
    const double var = std::max(sum_sq / n - mean * mean, 0.0);
    const double inv_std = 1.0 / std::sqrt(var + kEps);
    inv_std_[c] = inv_std;

    for (std::size_t b = 0; b < batch; ++b) {
      const double* src = x.data() + (b * channels_ + c) * length;
      double* hat = x_hat_.data() + (b * channels_ + c) * length;
      double* dst = out.data() + (b * channels_ + c) * length;
      for (std::size_t l = 0; l < length; ++l) {
        hat[l] = (src[l] - mean) * inv_std;
        dst[l] = gamma_->value[c] * hat[l] + beta_->value[c];
      }
    }

    const double var_unbiased = n > 1.0 ? var * n / (n - 1.0) : var;
    running_mean_->value[c] = (1.0 - kMomentum) * running_mean_->value[c] + kMomentum * mean;
    running_var_->value[c] = (1.0 - kMomentum) * running_var_->value[c] + kMomentum * var_unbiased;
  }
  return out;
}

Tensor BatchNorm1d::backward(const Tensor& dy) {
  assert(x_hat_.numel() == dy.numel() && "batchnorm backward needs a train-mode forward");
  const std::size_t batch = dy.dim(0);
  const std::size_t length = dy.dim(2);
  const double n = static_cast<double>(batch * length);
  Tensor dx(dy.shape());

  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const double* g = dy.data() + (b * channels_ + c) * length;
      const double* hat = x_hat_.data() + (b * channels_ + c) * length;
      for (std::size_t l = 0; l < length; ++l) {
        sum_dy += g[l];
        sum_dy_xhat += g[l] * hat[l];
      }
    }
    gamma_->grad[c] += sum_dy_xhat;
    beta_->grad[c] += sum_dy;

    const double scale = gamma_->value[c] * inv_std_[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const double* g = dy.data() + (b * channels_ + c) * length;
      const double* hat = x_hat_.data() + (b * channels_ + c) * length;
      double* dst = dx.data() + (b * channels_ + c) * length;
      for (std::size_t l = 0; l < length; ++l) {
        dst[l] = scale * (g[l] - sum_dy / n - hat[l] * sum_dy_xhat / n);
      }
    }
  }
  return dx;
}

Tensor MaxPool1d::forward(const Tensor& x) {
  assert(x.rank() == 3);
  const std::size_t batch = x.dim(0);
  const std::size_t channels = x.dim(1);
  const std::size_t length = x.dim(2);
  const std::size_t l_out = out_length(length);
  if (l_out == 0) throw std::invalid_argument("maxpool input shorter than kernel");
  in_shape_ = x.shape();

  Tensor out({batch, channels, l_out});
  argmax_.assign(out.numel(), 0);
  for (std::size_t bc = 0; bc < batch * channels; ++bc) {
    const double* src = x.data() + bc * length;
    double* dst = out.data() + bc * l_out;
    std::size_t* arg = argmax_.data() + bc * l_out;
    for (std::size_t j = 0; j < l_out; ++j) {
      std::size_t best = j * kernel_;
      double best_v = src[best];
      for (std::size_t t = 1; t < kernel_; ++t) {
        const std::size_t idx = j * kernel_ + t;
        if (src[idx] > best_v) {  // strict: ties keep the first index
          best_v = src[idx];
          best = idx;
        }
      }
      dst[j] = best_v;
      arg[j] = bc * length + best;
    }
  }
  return out;
}

Tensor MaxPool1d::backward(const Tensor& dy) {
  assert(dy.numel() == argmax_.size());
  Tensor dx(in_shape_);
  for (std::size_t i = 0; i < dy.numel(); ++i) dx[argmax_[i]] += dy[i];
  return dx;
}

Dense::Dense(ParameterSet& params, const std::string& prefix, std::size_t in_features,
             std::size_t out_features, Rng& rng)
    : in_features_(in_features), out_features_(out_features) {
  const double bound = kaiming_bound(in_features);
  weight_ = &params.add(prefix + ".weight", Tensor::uniform({out_features, in_features}, bound, rng));
  bias_ = &params.add(prefix + ".bias", Tensor({out_features}));
}

Tensor Dense::forward(const Tensor& x) {
  assert(x.rank() == 2 && x.dim(1) == in_features_);
  x_ = x;
  const std::size_t batch = x.dim(0);
  CMapRM xm(x.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(in_features_));
  CMapRM w(weight_->value.data(), static_cast<Eigen::Index>(out_features_),
           static_cast<Eigen::Index>(in_features_));
  Tensor out({batch, out_features_});
  MapRM om(out.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(out_features_));
  om.noalias() = xm * w.transpose();
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = out.data() + b * out_features_;
    for (std::size_t o = 0; o < out_features_; ++o) row[o] += bias_->value[o];
  }
  return out;
}

Tensor Dense::backward(const Tensor& dy) {
  const std::size_t batch = x_.dim(0);
  assert(dy.rank() == 2 && dy.dim(0) == batch && dy.dim(1) == out_features_);
  CMapRM dym(dy.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(out_features_));
  CMapRM xm(x_.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(in_features_));
  CMapRM w(weight_->value.data(), static_cast<Eigen::Index>(out_features_),
           static_cast<Eigen::Index>(in_features_));
  MapRM dw(weight_->grad.data(), static_cast<Eigen::Index>(out_features_),
           static_cast<Eigen::Index>(in_features_));
  dw.noalias() += dym.transpose() * xm;
  for (std::size_t o = 0; o < out_features_; ++o) {
    bias_->grad[o] += dym.col(static_cast<Eigen::Index>(o)).sum();
  }
  Tensor dx({batch, in_features_});
  MapRM dxm(dx.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(in_features_));
  dxm.noalias() = dym * w;
  return dx;
}

Tensor ReLU::forward(const Tensor& x) {
  Tensor out(x.shape());
  active_.assign(x.numel(), false);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (x[i] > 0.0) {
      out[i] = x[i];
      active_[i] = true;
    }
  }
  return out;
}

Tensor ReLU::backward(const Tensor& dy) {
  assert(dy.numel() == active_.size());
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.numel(); ++i) {
    if (active_[i]) dx[i] = dy[i];
  }
  return dx;
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng* rng) {
  if (mode == Mode::kEval || p_ <= 0.0) {
    mask_.clear();
    return x;
  }
  if (p_ >= 1.0) throw std::invalid_argument("dropout rate must be below 1");
  const bool reuse = frozen_ && mask_.size() == x.numel();
  if (!reuse) {
    if (rng == nullptr) throw std::logic_error("dropout in train mode needs an rng");
    const double keep_scale = 1.0 / (1.0 - p_);
    mask_.assign(x.numel(), 0.0);
    for (double& m : mask_) m = rng->uniform() >= p_ ? keep_scale : 0.0;
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * mask_[i];
  return out;
}

Tensor Dropout::backward(const Tensor& dy) {
  if (mask_.empty()) return dy;
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * mask_[i];
  return dx;
}

}  // namespace wks::nn
