#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "wks/grad_check.hpp"
#include "wks/layers.hpp"
#include "wks/params.hpp"
#include "wks/rng.hpp"
#include "wks/tensor.hpp"

using namespace wks::nn;
using wks::Rng;

namespace {

void set_values(Param& p, const std::vector<double>& v) {
  REQUIRE(p.value.numel() == v.size());
  p.value.values() = v;
}

/// 0.5 * sum(y^2); its gradient w.r.t. y is y itself, which makes the
/// per-layer finite-difference harness one line per layer.
double half_sq(const Tensor& y) {
  double s = 0.0;
  for (double v : y.values()) s += 0.5 * v * v;
  return s;
}

/// Brute-force valid conv reference: y[b,co,l] = b_co + sum_{ci,j} w[co,ci,j] x[b,ci,l+j].
Tensor conv_reference(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t B = x.dim(0), Ci = x.dim(1), L = x.dim(2);
  const std::size_t Co = w.dim(0), K = w.dim(2), Lo = L - K + 1;
  Tensor y({B, Co, Lo});
  for (std::size_t bb = 0; bb < B; ++bb)
    for (std::size_t co = 0; co < Co; ++co)
      for (std::size_t l = 0; l < Lo; ++l) {
        double acc = b[co];
        for (std::size_t ci = 0; ci < Ci; ++ci)
          for (std::size_t j = 0; j < K; ++j)
            acc += w.at(co, ci, j) * x.at(bb, ci, l + j);
        y.at(bb, co, l) = acc;
      }
  return y;
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("conv1d hand oracle") {
  ParameterSet params;
  Rng rng(1);
  Conv1d conv(params, "c", 1, 1, 2, rng);
  set_values(params.at("c.weight"), {2.0, 1.0});
  set_values(params.at("c.bias"), {0.5});

  Tensor x = Tensor::from({1, 1, 4}, {1, 2, 3, 4});
  Tensor y = conv.forward(x);
  REQUIRE(y.shape() == std::vector<std::size_t>{1, 1, 3});
  CHECK(y[0] == 4.5);   // 2*1 + 1*2 + 0.5
  CHECK(y[1] == 7.5);
  CHECK(y[2] == 10.5);

  Tensor dy = Tensor::full({1, 1, 3}, 1.0);
  params.zero_grads();
  Tensor dx = conv.backward(dy);
  CHECK(params.at("c.weight").grad.values() == std::vector<double>{6.0, 9.0});
  CHECK(params.at("c.bias").grad.values() == std::vector<double>{3.0});
  CHECK(dx.values() == std::vector<double>{2.0, 3.0, 3.0, 1.0});
}

TEST_CASE("conv1d matches the brute-force reference on random tensors") {
  ParameterSet params;
  Rng rng(7);
  Conv1d conv(params, "c", 3, 4, 3, rng);
  Tensor x = Tensor::uniform({2, 3, 7}, 1.0, rng);
  Tensor y = conv.forward(x);
  Tensor ref = conv_reference(x, params.at("c.weight").value, params.at("c.bias").value);
  REQUIRE(y.shape() == ref.shape());
  for (std::size_t i = 0; i < y.numel(); ++i)
    CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("conv1d finite-difference gradients") {
  ParameterSet params;
  Rng rng(3);
  Conv1d conv(params, "c", 2, 3, 3, rng);
  Tensor x = Tensor::uniform({2, 2, 6}, 1.0, rng);
  auto loss = [&] { return half_sq(conv.forward(x)); };
  auto backward = [&] {
    params.zero_grads();
    Tensor y = conv.forward(x);
    conv.backward(y);
  };
  auto report = check_gradients(params, loss, backward);
  INFO("worst: ", report.worst_param, "[", report.worst_flat_index, "]");
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("maxpool keeps the first index on ties") {
  MaxPool1d pool(2);
  Tensor x = Tensor::from({1, 1, 6}, {3, 1, 4, 4, 2, 0});
  Tensor y = pool.forward(x);
  REQUIRE(y.shape() == std::vector<std::size_t>{1, 1, 3});
  CHECK(y[0] == 3);
  CHECK(y[1] == 4);
  CHECK(y[2] == 2);

  Tensor dy = Tensor::from({1, 1, 3}, {1.0, 10.0, 100.0});
  Tensor dx = pool.backward(dy);
  // the tie in (4, 4) routes gradient to the first element
  CHECK(dx.values() == std::vector<double>{1, 0, 10, 0, 100, 0});
}

TEST_CASE("maxpool drops the trailing remainder") {
  MaxPool1d pool(2);
  Tensor x = Tensor::from({1, 1, 5}, {1, 2, 3, 4, 9});
  Tensor y = pool.forward(x);
  CHECK(y.shape() == std::vector<std::size_t>{1, 1, 2});
  CHECK(y[1] == 4);
}

TEST_CASE("batchnorm train statistics and running update") {
  ParameterSet params;
  BatchNorm1d bn(params, "bn", 2);
  Rng rng(5);
  Tensor x = Tensor::uniform({3, 2, 4}, 2.0, rng);
  for (auto& v : x.values()) v += 1.5;  // give it a nonzero mean
  Tensor y = bn.forward(x, Mode::kTrain);

  // normalized output: per-channel mean 0, biased variance ~1
  for (std::size_t c = 0; c < 2; ++c) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t l = 0; l < 4; ++l) {
        sum += y.at(b, c, l);
        sq += y.at(b, c, l) * y.at(b, c, l);
      }
    const double mean = sum / 12.0;
    CHECK(mean == doctest::Approx(0.0).epsilon(1.0).scale(1e-12));
    CHECK(sq / 12.0 == doctest::Approx(1.0).epsilon(1e-4));  // eps shifts it slightly
  }

  // running stats moved from their (0, 1) init toward the batch stats
  for (std::size_t c = 0; c < 2; ++c) {
    double sum = 0.0;
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t l = 0; l < 4; ++l) sum += x.at(b, c, l);
    const double batch_mean = sum / 12.0;
    CHECK(params.at("bn.running_mean").value[c] ==
          doctest::Approx(0.1 * batch_mean).epsilon(1e-12));
    CHECK_FALSE(params.at("bn.running_mean").trainable);
  }
}

TEST_CASE("batchnorm eval uses running stats as a fixed affine map") {
  ParameterSet params;
  BatchNorm1d bn(params, "bn", 1);
  set_values(params.at("bn.running_mean"), {2.0});
  set_values(params.at("bn.running_var"), {4.0});
  set_values(params.at("bn.gamma"), {3.0});
  set_values(params.at("bn.beta"), {-1.0});
  Tensor x = Tensor::from({1, 1, 2}, {2.0, 4.0});
  Tensor y = bn.forward(x, Mode::kEval);
  // (x - 2)/sqrt(4 + eps) * 3 - 1
  CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(-1.0 + 3.0 * 2.0 / std::sqrt(4.0 + 1e-5)).epsilon(1e-12));
}

TEST_CASE("batchnorm refuses single-element train batches") {
  ParameterSet params;
  BatchNorm1d bn(params, "bn", 3);
  Tensor x({1, 3, 1});
  CHECK_THROWS_AS(bn.forward(x, Mode::kTrain), std::invalid_argument);
  CHECK_NOTHROW(bn.forward(x, Mode::kEval));
}

TEST_CASE("batchnorm finite-difference gradients (train mode)") {
  ParameterSet params;
  BatchNorm1d bn(params, "bn", 2);
  Rng rng(9);
  set_values(params.at("bn.gamma"), {1.3, 0.7});
  set_values(params.at("bn.beta"), {0.2, -0.4});
  Tensor x = Tensor::uniform({4, 2, 3}, 1.0, rng);
  auto loss = [&] {
    Tensor y = bn.forward(x, Mode::kTrain);
    double s = 0.0;
    // an asymmetric functional; plain sums would hide mean-shift errors
    for (std::size_t i = 0; i < y.numel(); ++i)
      s += y[i] * (0.1 * static_cast<double>(i % 5) + 0.5 * y[i]);
    return s;
  };
  auto backward = [&] {
    params.zero_grads();
    Tensor y = bn.forward(x, Mode::kTrain);
    Tensor dy(y.shape());
    for (std::size_t i = 0; i < y.numel(); ++i)
      dy[i] = 0.1 * static_cast<double>(i % 5) + y[i];
    bn.backward(dy);
  };
  auto report = check_gradients(params, loss, backward);
  INFO("worst: ", report.worst_param);
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("dense hand oracle") {
  ParameterSet params;
  Rng rng(4);
  Dense dense(params, "d", 2, 3, rng);
  set_values(params.at("d.weight"), {1, 2, 3, 4, 5, 6});  // [3, 2]
  set_values(params.at("d.bias"), {0.1, 0.2, 0.3});
  Tensor x = Tensor::from({1, 2}, {1.0, -1.0});
  Tensor y = dense.forward(x);
  CHECK(y.at(0, 0) == doctest::Approx(1 - 2 + 0.1).epsilon(1e-12));
  CHECK(y.at(0, 1) == doctest::Approx(3 - 4 + 0.2).epsilon(1e-12));
  CHECK(y.at(0, 2) == doctest::Approx(5 - 6 + 0.3).epsilon(1e-12));

  params.zero_grads();
  Tensor dy = Tensor::from({1, 3}, {1.0, 0.0, -1.0});
  Tensor dx = dense.backward(dy);
  // dX = dy * W = [1*1 + 0*3 - 1*5, 1*2 + 0*4 - 1*6]
  CHECK(dx.at(0, 0) == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK(dx.at(0, 1) == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK(params.at("d.bias").grad.values() == std::vector<double>{1.0, 0.0, -1.0});
}

TEST_CASE("dense finite-difference gradients") {
  ParameterSet params;
  Rng rng(8);
  Dense dense(params, "d", 4, 3, rng);
  Tensor x = Tensor::uniform({5, 4}, 1.0, rng);
  auto loss = [&] { return half_sq(dense.forward(x)); };
  auto backward = [&] {
    params.zero_grads();
    Tensor y = dense.forward(x);
    dense.backward(y);
  };
  CHECK(check_gradients(params, loss, backward).max_rel_error < 1e-6);
}

TEST_CASE("relu forward and mask backward") {
  ReLU relu;
  Tensor x = Tensor::from({2, 2}, {-1.0, 2.0, 0.0, -3.0});
  Tensor y = relu.forward(x);
  CHECK(y.values() == std::vector<double>{0.0, 2.0, 0.0, 0.0});
  Tensor dy = Tensor::full({2, 2}, 5.0);
  Tensor dx = relu.backward(dy);
  CHECK(dx.values() == std::vector<double>{0.0, 5.0, 0.0, 0.0});
}

TEST_CASE("dropout semantics") {
  Dropout drop(0.5);
  Rng rng(21);
  Tensor x = Tensor::full({100, 100}, 1.0);

  SUBCASE("eval is the identity") {
    Tensor y = drop.forward(x, Mode::kEval, nullptr);
    CHECK(y.values() == x.values());
  }
  SUBCASE("p = 0 is the identity even in train mode") {
    Dropout none(0.0);
    Tensor y = none.forward(x, Mode::kTrain, &rng);
    CHECK(y.values() == x.values());
  }
  SUBCASE("train mode keeps about (1-p) scaled by 1/(1-p)") {
    Tensor y = drop.forward(x, Mode::kTrain, &rng);
    std::size_t kept = 0;
    for (double v : y.values()) {
      CHECK((v == 0.0 || v == 2.0));
      if (v != 0.0) ++kept;
    }
    const double rate = static_cast<double>(kept) / 10000.0;
    CHECK(rate > 0.47);
    CHECK(rate < 0.53);
  }
  SUBCASE("train mode without an rng is a hard error") {
    CHECK_THROWS_AS(drop.forward(x, Mode::kTrain, nullptr), std::logic_error);
  }
  SUBCASE("frozen mask is reused across forwards") {
    drop.freeze_mask(true);
    Tensor y1 = drop.forward(x, Mode::kTrain, &rng);
    Tensor y2 = drop.forward(x, Mode::kTrain, &rng);
    CHECK(y1.values() == y2.values());
    drop.freeze_mask(false);
    Tensor y3 = drop.forward(x, Mode::kTrain, &rng);
    CHECK(y3.values() != y1.values());
  }
  SUBCASE("backward applies the same mask") {
    Tensor y = drop.forward(x, Mode::kTrain, &rng);
    Tensor dx = drop.backward(Tensor::full({100, 100}, 1.0));
    for (std::size_t i = 0; i < y.numel(); ++i)
      CHECK(dx[i] == (y[i] == 0.0 ? 0.0 : 2.0));
  }
}

}  // TEST_SUITE
