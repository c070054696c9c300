#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "doctest.h"
#include "wks/errors.hpp"
#include "wks/grad_check.hpp"
#include "wks/losses.hpp"
#include "wks/model.hpp"
#include "wks/params.hpp"
#include "wks/rng.hpp"

using namespace wks::est;
namespace nn = wks::nn;
using wks::Rng;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.sl = 8;
  c.sensors = 3;
  c.conv1_filters = 4;
  c.conv1_kernel = 3;
  c.conv2_filters = 4;
  c.conv2_kernel = 2;
  c.pool = 2;
  c.lstm_hidden = 4;
  c.shared_width = 8;
  c.speed_classes = 3;
  return c;
}

struct Batch {
  nn::Tensor x;
  std::vector<double> tx;
  std::vector<int> tv;
  std::vector<int> td;
};

Batch random_batch(const ModelConfig& c, std::size_t B, std::uint64_t seed) {
  Batch b;
  Rng rng(seed);
  b.x = nn::Tensor::uniform({B, c.sl, c.sensors}, 1.0, rng);
  for (std::size_t i = 0; i < B; ++i) {
    b.tx.push_back(rng.uniform(-1.0, 1.0));
    b.tv.push_back(static_cast<int>(rng.below(c.speed_classes)));
    b.td.push_back(static_cast<int>(rng.below(2)));
  }
  return b;
}

/// Combined three-head loss; backward mirrors it exactly.
double full_loss(Estimator& model, const Batch& b, Rng* drop) {
  Output out = model.forward(b.x, nn::Mode::kTrain, drop);
  return nn::mse_loss(out.x, b.tx, nullptr) +
         nn::softmax_cross_entropy(out.v_logits, b.tv, nullptr) +
         nn::softmax_cross_entropy(out.d_logits, b.td, nullptr);
}

void full_backward(Estimator& model, nn::ParameterSet& params, const Batch& b, Rng* drop) {
  params.zero_grads();
  Output out = model.forward(b.x, nn::Mode::kTrain, drop);
  nn::Tensor dx, dv, dd;
  nn::mse_loss(out.x, b.tx, &dx);
  nn::softmax_cross_entropy(out.v_logits, b.tv, &dv);
  nn::softmax_cross_entropy(out.d_logits, b.td, &dd);
  model.backward(dx, dv, dd);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("shape chain for the supported window lengths") {
  ModelConfig c;
  CHECK(c.conv1_out() == 60);
  CHECK(c.pool1_out() == 30);
  CHECK(c.conv2_out() == 28);
  CHECK(c.lstm_steps() == 14);
  CHECK(c.flatten_width() == 64 * 14);
  c.sl = 32;
  CHECK(c.lstm_steps() == 6);
  c.sl = 48;
  CHECK(c.lstm_steps() == 10);
  c.sl = 80;
  CHECK(c.lstm_steps() == 18);
}

TEST_CASE("parameter budgets") {
  // hybrid default: conv 512 + 64 + 6208 + 128, bilstm 66048,
  // shared 8256, heads 65 + 325 + 130 = 81736 trainable
  nn::ParameterSet hybrid_params;
  Rng r1(1);
  Estimator hybrid(ModelConfig{}, hybrid_params, r1);
  CHECK(hybrid_params.trainable_parameters() == 81736);

  // cnn-only replaces the bilstm by a matched-width dense reduction
  ModelConfig cnn;
  cnn.cnn_only = true;
  CHECK(cnn.matched_width() == 77);
  nn::ParameterSet cnn_params;
  Rng r2(1);
  Estimator cnn_model(cnn, cnn_params, r2);
  const double hybrid_n = static_cast<double>(hybrid_params.trainable_parameters());
  const double cnn_n = static_cast<double>(cnn_params.trainable_parameters());
  CHECK(std::abs(cnn_n - hybrid_n) / hybrid_n < 0.01);

  // tiny: conv 40 + 36, bn 8 + 8, bilstm 2 * (64 + 64 + 16), shared 72,
  // heads 9 + 27 + 18
  nn::ParameterSet tiny_params;
  Rng r3(1);
  Estimator tiny(tiny_config(), tiny_params, r3);
  CHECK(tiny_params.trainable_parameters() == 506);
}

TEST_CASE("config validation") {
  ModelConfig bad = tiny_config();
  bad.sl = 2;  // conv1 kernel 3 does not fit
  CHECK_THROWS_AS(bad.validate(), wks::ConfigError);
  ModelConfig pool0 = tiny_config();
  pool0.pool = 0;
  CHECK_THROWS_AS(pool0.validate(), wks::ConfigError);
  ModelConfig drop = tiny_config();
  drop.dropout = 1.0;
  CHECK_THROWS_AS(drop.validate(), wks::ConfigError);
  ModelConfig classes = tiny_config();
  classes.speed_classes = 0;
  CHECK_THROWS_AS(classes.validate(), wks::ConfigError);
  CHECK_NOTHROW(tiny_config().validate());
}

TEST_CASE("forward output shapes and eval determinism") {
  ModelConfig c = tiny_config();
  nn::ParameterSet params;
  Rng rng(2);
  Estimator model(c, params, rng);
  Batch b = random_batch(c, 5, 3);
  Output out = model.forward(b.x, nn::Mode::kEval);
  CHECK(out.x.shape() == std::vector<std::size_t>{5, 1});
  CHECK(out.v_logits.shape() == std::vector<std::size_t>{5, 3});
  CHECK(out.d_logits.shape() == std::vector<std::size_t>{5, 2});

  Output again = model.forward(b.x, nn::Mode::kEval);
  CHECK(out.x.values() == again.x.values());
  CHECK(out.v_logits.values() == again.v_logits.values());

  // same seed, fresh model: identical init, identical outputs
  nn::ParameterSet params2;
  Rng rng2(2);
  Estimator model2(c, params2, rng2);
  Output other = model2.forward(b.x, nn::Mode::kEval);
  CHECK(out.x.values() == other.x.values());
}

TEST_CASE("dropout makes train mode stochastic, eval mode not") {
  ModelConfig c = tiny_config();
  nn::ParameterSet params;
  Rng rng(4);
  Estimator model(c, params, rng);
  Batch b = random_batch(c, 4, 5);
  Rng drop(9);
  Output t1 = model.forward(b.x, nn::Mode::kTrain, &drop);
  Output t2 = model.forward(b.x, nn::Mode::kTrain, &drop);
  CHECK(t1.x.values() != t2.x.values());

  model.freeze_dropout(true);
  Output f1 = model.forward(b.x, nn::Mode::kTrain, &drop);
  Output f2 = model.forward(b.x, nn::Mode::kTrain, &drop);
  CHECK(f1.x.values() == f2.x.values());
  model.freeze_dropout(false);
}

TEST_CASE("hybrid end-to-end finite-difference gradients") {
  ModelConfig c = tiny_config();
  nn::ParameterSet params;
  Rng rng(6);
  Estimator model(c, params, rng);
  Batch b = random_batch(c, 3, 7);
  Rng drop(11);
  model.freeze_dropout(true);
  model.forward(b.x, nn::Mode::kTrain, &drop);  // draw the frozen mask once

  auto loss = [&] { return full_loss(model, b, &drop); };
  auto backward = [&] { full_backward(model, params, b, &drop); };
  auto report = nn::check_gradients(params, loss, backward);
  INFO("worst: ", report.worst_param, "[", report.worst_flat_index, "] analytic ",
       report.analytic, " numeric ", report.numeric);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("hybrid gradients with two lstm steps exercise the recurrence") {
  ModelConfig c = tiny_config();
  c.sl = 12;  // 12 -> 10 -> 5 -> 4 -> 2 steps
  REQUIRE(c.lstm_steps() == 2);
  nn::ParameterSet params;
  Rng rng(16);
  Estimator model(c, params, rng);
  Batch b = random_batch(c, 3, 17);
  Rng drop(18);
  model.freeze_dropout(true);
  model.forward(b.x, nn::Mode::kTrain, &drop);

  auto loss = [&] { return full_loss(model, b, &drop); };
  auto backward = [&] { full_backward(model, params, b, &drop); };
  CHECK(nn::check_gradients(params, loss, backward).max_rel_error < 1e-4);
}

TEST_CASE("cnn-only end-to-end finite-difference gradients") {
  ModelConfig c = tiny_config();
  c.cnn_only = true;
  nn::ParameterSet params;
  Rng rng(8);
  Estimator model(c, params, rng);
  Batch b = random_batch(c, 3, 9);
  Rng drop(13);
  model.freeze_dropout(true);
  model.forward(b.x, nn::Mode::kTrain, &drop);

  auto loss = [&] { return full_loss(model, b, &drop); };
  auto backward = [&] { full_backward(model, params, b, &drop); };
  CHECK(nn::check_gradients(params, loss, backward).max_rel_error < 1e-4);
}

TEST_CASE("non-finite activations abort training with a diagnostic") {
  ModelConfig c = tiny_config();
  nn::ParameterSet params;
  Rng rng(10);
  Estimator model(c, params, rng);
  params.at("head_x.weight").value[0] = std::numeric_limits<double>::infinity();
  Batch b = random_batch(c, 3, 11);
  Rng drop(14);
  CHECK_THROWS_AS(model.forward(b.x, nn::Mode::kTrain, &drop),
                  wks::TrainingDiverged);
}

}  // TEST_SUITE
