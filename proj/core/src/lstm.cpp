#include "wks/lstm.hpp"

#include <Eigen/Core>

#include <cassert>
#include <cmath>

namespace wks::nn {
namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using CMapRM = Eigen::Map<const MatrixRM>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

LstmDirection::LstmDirection(ParameterSet& params, const std::string& prefix, std::size_t input,
                             std::size_t hidden, bool reverse, Rng& rng)
    : input_(input), hidden_(hidden), reverse_(reverse) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  w_x_ = &params.add(prefix + ".w_x", Tensor::uniform({4 * hidden, input}, bound, rng));
  w_h_ = &params.add(prefix + ".w_h", Tensor::uniform({4 * hidden, hidden}, bound, rng));
  Tensor b = Tensor::uniform({4 * hidden}, bound, rng);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  bias_ = &params.add(prefix + ".bias", std::move(b));
}

Tensor LstmDirection::forward(const Tensor& x) {
  assert(x.rank() == 3 && x.dim(2) == input_);
  batch_ = x.dim(0);
  steps_ = x.dim(1);
  const std::size_t B = batch_, T = steps_, H = hidden_;

  x_flat_ = Tensor::from({B * T, input_}, x.values());
  CMapRM xm(x_flat_.data(), static_cast<Eigen::Index>(B * T), static_cast<Eigen::Index>(input_));
  CMapRM wx(w_x_->value.data(), static_cast<Eigen::Index>(4 * H), static_cast<Eigen::Index>(input_));
  CMapRM wh(w_h_->value.data(), static_cast<Eigen::Index>(4 * H), static_cast<Eigen::Index>(H));

  MatrixRM x_proj = xm * wx.transpose();  // [B*T, 4H], row b*T + t

  for (Tensor* t : {&i_, &f_, &g_, &o_, &c_, &tanh_c_, &h_}) *t = Tensor({T, B, H});

  MatrixRM pre(B, 4 * H);
  MatrixRM h_prev = MatrixRM::Zero(B, H);
  Tensor out({B, T, H});

  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t tau = time_of(s);
    for (std::size_t b = 0; b < B; ++b) {
      pre.row(static_cast<Eigen::Index>(b)) = x_proj.row(static_cast<Eigen::Index>(b * T + tau));
    }
    pre.noalias() += h_prev * wh.transpose();

    double* is = i_.data() + s * B * H;
    double* fs = f_.data() + s * B * H;
    double* gs = g_.data() + s * B * H;
    double* os = o_.data() + s * B * H;
    double* cs = c_.data() + s * B * H;
    double* tcs = tanh_c_.data() + s * B * H;
    double* hs = h_.data() + s * B * H;
    const double* c_prev = s > 0 ? c_.data() + (s - 1) * B * H : nullptr;
    const double* bias = bias_->value.data();

    for (std::size_t b = 0; b < B; ++b) {
      const double* p = pre.data() + b * 4 * H;
      for (std::size_t j = 0; j < H; ++j) {
        const std::size_t k = b * H + j;
        const double iv = sigmoid(p[j] + bias[j]);
        const double fv = sigmoid(p[H + j] + bias[H + j]);
        const double gv = std::tanh(p[2 * H + j] + bias[2 * H + j]);
        const double ov = sigmoid(p[3 * H + j] + bias[3 * H + j]);
        const double cv = fv * (c_prev != nullptr ? c_prev[k] : 0.0) + iv * gv;
        const double tcv = std::tanh(cv);
        is[k] = iv;
        fs[k] = fv;
        gs[k] = gv;
        os[k] = ov;
        cs[k] = cv;
        tcs[k] = tcv;
        hs[k] = ov * tcv;
      }
    }
    for (std::size_t b = 0; b < B; ++b) {
      double* dst = out.data() + (b * T + tau) * H;
      const double* src = hs + b * H;
      for (std::size_t j = 0; j < H; ++j) dst[j] = src[j];
      h_prev.row(static_cast<Eigen::Index>(b)) =
          Eigen::Map<const Eigen::RowVectorXd>(src, static_cast<Eigen::Index>(H));
    }
  }
  return out;
}

Tensor LstmDirection::backward(const Tensor& dh_seq) {
  const std::size_t B = batch_, T = steps_, H = hidden_;
  assert(dh_seq.rank() == 3 && dh_seq.dim(0) == B && dh_seq.dim(1) == T && dh_seq.dim(2) == H);

  CMapRM wh(w_h_->value.data(), static_cast<Eigen::Index>(4 * H), static_cast<Eigen::Index>(H));
  MapRM dwh(w_h_->grad.data(), static_cast<Eigen::Index>(4 * H), static_cast<Eigen::Index>(H));

  MatrixRM da_all = MatrixRM::Zero(B * T, 4 * H);  // row b*T + t
  MatrixRM da(B, 4 * H);
  MatrixRM dh_next = MatrixRM::Zero(B, H);
  MatrixRM dc_next = MatrixRM::Zero(B, H);
  MatrixRM h_prev(B, H);
  double* db = bias_->grad.data();

  for (std::size_t s_plus = T; s_plus > 0; --s_plus) {
    const std::size_t s = s_plus - 1;
    const std::size_t tau = time_of(s);
    const double* is = i_.data() + s * B * H;
    const double* fs = f_.data() + s * B * H;
    const double* gs = g_.data() + s * B * H;
    const double* os = o_.data() + s * B * H;
    const double* tcs = tanh_c_.data() + s * B * H;
    const double* c_prev = s > 0 ? c_.data() + (s - 1) * B * H : nullptr;

    for (std::size_t b = 0; b < B; ++b) {
      const double* dh_in = dh_seq.data() + (b * T + tau) * H;
      double* row = da.data() + b * 4 * H;
      for (std::size_t j = 0; j < H; ++j) {
        const std::size_t k = b * H + j;
        const double dh = dh_in[j] + dh_next(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j));
        const double dov = dh * tcs[k];
        const double dc = dh * os[k] * (1.0 - tcs[k] * tcs[k]) +
                          dc_next(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j));
        const double div = dc * gs[k];
        const double dgv = dc * is[k];
        const double dfv = dc * (c_prev != nullptr ? c_prev[k] : 0.0);
        dc_next(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) = dc * fs[k];
        row[j] = div * is[k] * (1.0 - is[k]);
        row[H + j] = dfv * fs[k] * (1.0 - fs[k]);
        row[2 * H + j] = dgv * (1.0 - gs[k] * gs[k]);
        row[3 * H + j] = dov * os[k] * (1.0 - os[k]);
      }
    }

    for (std::size_t b = 0; b < B; ++b) {
      da_all.row(static_cast<Eigen::Index>(b * T + tau)) = da.row(static_cast<Eigen::Index>(b));
      const double* row = da.data() + b * 4 * H;
      for (std::size_t j = 0; j < 4 * H; ++j) db[j] += row[j];
    }

    if (s > 0) {
      const double* hp = h_.data() + (s - 1) * B * H;
      for (std::size_t b = 0; b < B; ++b) {
        h_prev.row(static_cast<Eigen::Index>(b)) = Eigen::Map<const Eigen::RowVectorXd>(
            hp + b * H, static_cast<Eigen::Index>(H));
      }
      dwh.noalias() += da.transpose() * h_prev;
    }
    dh_next.noalias() = da * wh;
  }

  CMapRM xm(x_flat_.data(), static_cast<Eigen::Index>(B * T), static_cast<Eigen::Index>(input_));
  MapRM dwx(w_x_->grad.data(), static_cast<Eigen::Index>(4 * H), static_cast<Eigen::Index>(input_));
  dwx.noalias() += da_all.transpose() * xm;

  CMapRM wx(w_x_->value.data(), static_cast<Eigen::Index>(4 * H), static_cast<Eigen::Index>(input_));
  Tensor dx({B, T, input_});
  MapRM dxm(dx.data(), static_cast<Eigen::Index>(B * T), static_cast<Eigen::Index>(input_));
  dxm.noalias() = da_all * wx;
  return dx;
}

BiLstm::BiLstm(ParameterSet& params, const std::string& prefix, std::size_t input,
               std::size_t hidden, Rng& rng)
    : fwd_(params, prefix + ".fwd", input, hidden, false, rng),
      bwd_(params, prefix + ".bwd", input, hidden, true, rng) {}

Tensor BiLstm::forward(const Tensor& x) {
  const Tensor h_f = fwd_.forward(x);
  const Tensor h_b = bwd_.forward(x);
  const std::size_t B = x.dim(0), T = x.dim(1), H = hidden();
  Tensor out({B, T, 2 * H});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      double* dst = out.data() + (b * T + t) * 2 * H;
      const double* sf = h_f.data() + (b * T + t) * H;
      const double* sb = h_b.data() + (b * T + t) * H;
      for (std::size_t j = 0; j < H; ++j) {
        dst[j] = sf[j];
        dst[H + j] = sb[j];
      }
    }
  }
  return out;
}

Tensor BiLstm::backward(const Tensor& dy) {
  const std::size_t B = dy.dim(0), T = dy.dim(1), H = hidden();
  assert(dy.dim(2) == 2 * H);
  Tensor dh_f({B, T, H});
  Tensor dh_b({B, T, H});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      const double* src = dy.data() + (b * T + t) * 2 * H;
      double* df = dh_f.data() + (b * T + t) * H;
      double* db = dh_b.data() + (b * T + t) * H;
      for (std::size_t j = 0; j < H; ++j) {
        df[j] = src[j];
        db[j] = src[H + j];
      }
    }
  }
  Tensor dx = fwd_.backward(dh_f);
  const Tensor dx_b = bwd_.backward(dh_b);
  for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += dx_b[i];
  return dx;
}

}  // namespace wks::nn
