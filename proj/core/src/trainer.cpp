#include "wks/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "wks/errors.hpp"
#include "wks/losses.hpp"

namespace wks::est {
namespace {

bool params_finite(const nn::ParameterSet& params) {
  for (const auto& p : params.items()) {
    if (!p.value.all_finite()) return false;
  }
  return true;
}

std::size_t argmax_row(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

void check_compatible(const Estimator& model, const data::LabeledDataset& dataset) {
  const ModelConfig& mc = model.config();
  if (mc.sl != dataset.sl || mc.sensors != dataset.sensors ||
      mc.speed_classes != static_cast<std::size_t>(dataset.num_speed_classes())) {
    throw ConfigError("model configuration does not match the dataset (sl/sensors/speed classes)");
  }
}

}  // namespace

double fitness(const Metrics& metrics) {
  return (1.0 - metrics.acc_v) + (1.0 - metrics.acc_d) + metrics.rmse_x;
}

void fill_batch(const data::LabeledDataset& dataset, const std::vector<std::size_t>& indices,
                std::size_t begin, std::size_t end, nn::Tensor& x, std::vector<double>& tx,
                std::vector<int>& tv, std::vector<int>& td) {
  const std::size_t batch = end - begin;
  x = nn::Tensor({batch, dataset.sl, dataset.sensors});
  tx.resize(batch);
  tv.resize(batch);
  td.resize(batch);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const data::LabeledSample& sample = dataset.samples[indices[begin + bi]];
    double* dst = x.data() + bi * dataset.sl * dataset.sensors;
    const double* src = sample.window.values.data();
    for (std::size_t r = 0; r < dataset.sl; ++r) {
      for (std::size_t s = 0; s < dataset.sensors; ++s) {
        dst[r * dataset.sensors + s] =
            (src[r * dataset.sensors + s] - dataset.norm.mean[s]) / dataset.norm.stddev[s];
      }
    }
    tx[bi] = sample.label.x;
    tv[bi] = sample.label.v_class;
    td[bi] = sample.label.d_class;
  }
}

TrainHistory train(Estimator& model, nn::ParameterSet& params,
                   const data::LabeledDataset& dataset, const TrainConfig& config) {
  check_compatible(model, dataset);
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");
  if (dataset.train_indices.empty()) throw ConfigError("dataset has an empty training split");

  Rng base(config.seed);
  Rng shuffle_rng = base.fork(0xA);
  Rng dropout_rng = base.fork(0xB);

  std::vector<std::size_t> order = dataset.train_indices;
  const std::size_t n = order.size();

  TrainHistory history;
  nn::ParameterSet::Snapshot last_good = params.snapshot();

  nn::Tensor x, gx, gv, gd;
  std::vector<double> tx;
  std::vector<int> tv, td;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochStats stats;

    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(begin + config.batch_size, n);
      const double bsz = static_cast<double>(end - begin);
      fill_batch(dataset, order, begin, end, x, tx, tv, td);

      double l1 = 0.0, l2 = 0.0, l3 = 0.0, total = 0.0;
      try {
        Output out = model.forward(x, nn::Mode::kTrain, &dropout_rng);
        l1 = nn::mse_loss(out.x, tx, &gx);
        l2 = nn::softmax_cross_entropy(out.v_logits, tv, &gv);
        l3 = nn::softmax_cross_entropy(out.d_logits, td, &gd);
        total = config.lambda[0] * l1 + config.lambda[1] * l2 + config.lambda[2] * l3;
        if (!std::isfinite(total)) throw TrainingDiverged("non-finite training loss");

        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] *= config.lambda[0];
        for (std::size_t i = 0; i < gv.numel(); ++i) gv[i] *= config.lambda[1];
        for (std::size_t i = 0; i < gd.numel(); ++i) gd[i] *= config.lambda[2];

        params.zero_grads();
        model.backward(gx, gv, gd);
        params.adam_step(config.adam);
      } catch (const TrainingDiverged& e) {
        params.restore(last_good);
        history.diverged = true;
        if (config.log != nullptr) {
          *config.log << "training diverged in epoch " << epoch + 1 << " (" << e.what()
                      << "); rolled back to epoch " << history.completed_epochs << "\n";
        }
        return history;
      }

      stats.total += total * bsz;
      stats.l1 += l1 * bsz;
      stats.l2 += l2 * bsz;
      stats.l3 += l3 * bsz;
    }

    const double dn = static_cast<double>(n);
    stats.total /= dn;
    stats.l1 /= dn;
    stats.l2 /= dn;
    stats.l3 /= dn;
    history.epochs.push_back(stats);

    if (!params_finite(params)) {
      params.restore(last_good);
      history.diverged = true;
      if (config.log != nullptr) {
        *config.log << "non-finite parameters after epoch " << epoch + 1 << "; rolled back to epoch "
                    << history.completed_epochs << "\n";
      }
      return history;
    }
    last_good = params.snapshot();
    history.completed_epochs = epoch + 1;

    if (config.log != nullptr &&
        (epoch == 0 || (epoch + 1) % config.log_every == 0 || epoch + 1 == config.epochs)) {
      *config.log << "epoch " << epoch + 1 << "/" << config.epochs << " loss " << stats.total
                  << " (x " << stats.l1 << ", v " << stats.l2 << ", d " << stats.l3 << ")"
                  << std::endl;
    }
  }
  return history;
}

Metrics evaluate(Estimator& model, const data::LabeledDataset& dataset,
                 const std::vector<std::size_t>& indices, std::size_t batch_size) {
  check_compatible(model, dataset);
  if (indices.empty()) throw ConfigError("cannot evaluate on an empty index set");

  const std::size_t K = static_cast<std::size_t>(dataset.num_speed_classes());
  Metrics metrics;
  metrics.speed_classes = K;
  metrics.confusion_v.assign(K * K, 0);
  metrics.confusion_d.assign(4, 0);

  nn::Tensor x;
  std::vector<double> tx;
  std::vector<int> tv, td;
  double sq_err = 0.0;

  for (std::size_t begin = 0; begin < indices.size(); begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, indices.size());
    fill_batch(dataset, indices, begin, end, x, tx, tv, td);
    Output out = model.forward(x, nn::Mode::kEval);
    const std::size_t bsz = end - begin;
    for (std::size_t bi = 0; bi < bsz; ++bi) {
      const double err = out.x[bi] - tx[bi];
      sq_err += err * err;
      const std::size_t pv = argmax_row(out.v_logits.data() + bi * K, K);
      const std::size_t pd = argmax_row(out.d_logits.data() + bi * 2, 2);
      metrics.confusion_v[static_cast<std::size_t>(tv[bi]) * K + pv] += 1;
      metrics.confusion_d[static_cast<std::size_t>(td[bi]) * 2 + pd] += 1;
    }
    metrics.count += bsz;
  }

  metrics.rmse_x = std::sqrt(sq_err / static_cast<double>(metrics.count));
  std::size_t hit_v = 0, hit_d = 0;
  for (std::size_t k = 0; k < K; ++k) hit_v += metrics.confusion_v[k * K + k];
  hit_d = metrics.confusion_d[0] + metrics.confusion_d[3];
  metrics.acc_v = static_cast<double>(hit_v) / static_cast<double>(metrics.count);
  metrics.acc_d = static_cast<double>(hit_d) / static_cast<double>(metrics.count);
  return metrics;
}

}  // namespace wks::est
