#include "wks/woa.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "wks/errors.hpp"
#include "wks/rng.hpp"

namespace wks::opt {
namespace {

using QuantKey = std::vector<std::int64_t>;

QuantKey quantize(const std::vector<double>& x) {
  QuantKey key(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) key[i] = std::llround(x[i] / 1e-4);
  return key;
}

std::vector<double> sample_uniform(const WoaConfig& config, Rng& rng) {
  std::vector<double> x(config.dims());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(config.lower[i], config.upper[i]);
  return x;
}

bool finite_vec(const std::vector<double>& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

void WoaConfig::validate() const {
  if (population == 0) throw ConfigError("whale population must be positive");
  if (iterations == 0) throw ConfigError("whale iteration count must be positive");
  if (lower.empty() || lower.size() != upper.size()) {
    throw ConfigError("whale bounds must be non-empty and of equal dimension");
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) throw ConfigError("whale bounds must satisfy lower < upper");
  }
}

std::vector<double> encircle_step(const std::vector<double>& x, const std::vector<double>& best,
                                  double a_coef, double c_coef) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = best[i] - a_coef * std::abs(c_coef * best[i] - x[i]);
  }
  return out;
}

std::vector<double> spiral_step(const std::vector<double>& x, const std::vector<double>& best,
                                double b, double l) {
  const double swirl = std::exp(b * l) * std::cos(2.0 * std::numbers::pi * l);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::abs(best[i] - x[i]) * swirl + best[i];
  }
  return out;
}

void clamp_to_bounds(std::vector<double>& x, const std::vector<double>& lower,
                     const std::vector<double>& upper) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
}

WoaResult woa_optimize(const std::function<double(const std::vector<double>&)>& objective,
                       const WoaConfig& config) {
  config.validate();
  Rng rng(config.seed);

  WoaResult result;
  std::map<QuantKey, double> cache;
  auto eval = [&](const std::vector<double>& x) {
    const QuantKey key = quantize(x);
    auto it = cache.find(key);
    if (it != cache.end()) {
      ++result.cache_hits;
      return it->second;
    }
    double f = objective(x);
    if (!std::isfinite(f)) f = std::numeric_limits<double>::infinity();
    ++result.evaluations;
    cache.emplace(key, f);
    return f;
  };

  const std::size_t P = config.population;
  std::vector<std::vector<double>> pop(P);
  std::vector<double> fit(P);
  for (std::size_t i = 0; i < P; ++i) pop[i] = sample_uniform(config, rng);

  result.best = pop[0];
  result.best_fitness = std::numeric_limits<double>::infinity();
  auto record = [&](std::size_t iteration) {
    for (std::size_t i = 0; i < P; ++i) {
      fit[i] = eval(pop[i]);
      if (std::isinf(fit[i])) {  // objective rejected this point: resample the agent
        pop[i] = sample_uniform(config, rng);
        fit[i] = eval(pop[i]);
      }
      if (fit[i] < result.best_fitness) {
        result.best_fitness = fit[i];
        result.best = pop[i];
      }
    }
    WoaIteration snap;
    snap.iteration = iteration;
    snap.positions = pop;
    snap.fitness = fit;
    snap.best = result.best;
    snap.best_fitness = result.best_fitness;
    result.trace.push_back(std::move(snap));
  };

  record(0);

  for (std::size_t t = 0; t < config.iterations; ++t) {
    const double a = 2.0 - 2.0 * static_cast<double>(t) / static_cast<double>(config.iterations);
    for (std::size_t i = 0; i < P; ++i) {
      const double r1 = rng.uniform();
      const double r2 = rng.uniform();
      const double p = rng.uniform();
      const double l = rng.uniform(-1.0, 1.0);
      const double a_coef = 2.0 * a * r1 - a;
      const double c_coef = 2.0 * r2;

      std::vector<double> moved;
      if (p < 0.5) {
        if (std::abs(a_coef) < 1.0) {
          moved = encircle_step(pop[i], result.best, a_coef, c_coef);
        } else {
          const std::size_t j = static_cast<std::size_t>(rng.below(P));
          moved = encircle_step(pop[i], pop[j], a_coef, c_coef);
        }
      } else {
        moved = spiral_step(pop[i], result.best, config.spiral_b, l);
      }
      if (!finite_vec(moved)) moved = sample_uniform(config, rng);
      clamp_to_bounds(moved, config.lower, config.upper);
      pop[i] = std::move(moved);
    }
    record(t + 1);
  }
  return result;
}

TuneResult tune_task_weights(const data::LabeledDataset& dataset, const TuneConfig& config) {
  TuneConfig cfg = config;
  if (cfg.woa.lower.empty()) {
    cfg.woa.lower.assign(3, 0.01);
    cfg.woa.upper.assign(3, 10.0);
  }
  if (cfg.woa.dims() != 3) throw ConfigError("task-weight tuning needs 3-dimensional bounds");
  cfg.model.validate();

  std::map<QuantKey, est::Metrics> metrics_cache;
  auto objective = [&](const std::vector<double>& lambda) {
    const auto started = std::chrono::steady_clock::now();
    est::TrainConfig tc = cfg.train;
    tc.lambda = {lambda[0], lambda[1], lambda[2]};
    tc.log = nullptr;
    nn::ParameterSet params;
    Rng init_rng = Rng(cfg.model_seed).fork(0xC);  // same stream as the train workflow
    est::Estimator model(cfg.model, params, init_rng);
    est::train(model, params, dataset, tc);
    const est::Metrics m = est::evaluate(model, dataset, dataset.test_indices);
    metrics_cache.emplace(quantize(lambda), m);
    const double g = est::fitness(m);
    if (cfg.on_evaluation) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
      cfg.on_evaluation(lambda, g, elapsed.count());
    }
    return g;
  };

  TuneResult result;
  result.woa = woa_optimize(objective, cfg.woa);
  result.best_lambda = {result.woa.best[0], result.woa.best[1], result.woa.best[2]};
  result.best_fitness = result.woa.best_fitness;
  auto it = metrics_cache.find(quantize(result.woa.best));
  if (it != metrics_cache.end()) {
    result.best_metrics = it->second;
  }
  return result;
}

}  // namespace wks::opt
