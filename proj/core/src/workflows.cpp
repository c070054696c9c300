#include "wks/workflows.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "json.hpp"

#include "wks/dataset.hpp"
#include "wks/errors.hpp"
#include "wks/hash.hpp"
#include "wks/version.hpp"

namespace wks::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed while writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed json in " + path.string() + ": " + e.what());
  }
}

json versions_json() {
  const std::string eigen = std::to_string(EIGEN_WORLD_VERSION) + "." +
                            std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION);
  return json{{"wakesense", kVersion},
              {"eigen", eigen},
              {"dataset_format", "WKDSET01"},
              {"checkpoint_format", "WKCKPT01"}};
}

json manifest_base(const RunConfig& config, const std::string& command) {
  return json{{"command", command},
              {"config_hash", config_hash(config)},
              {"seed", config.seed},
              {"case", config.case_id},
              {"versions", versions_json()}};
}

json metrics_to_json(const est::Metrics& m) {
  const std::size_t k = m.speed_classes;
  json conf_v = json::array();
  for (std::size_t r = 0; r < k; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < k; ++c) row.push_back(m.confusion_v[r * k + c]);
    conf_v.push_back(row);
  }
  json conf_d = json::array();
  for (std::size_t r = 0; r < 2; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < 2; ++c) row.push_back(m.confusion_d[r * 2 + c]);
    conf_d.push_back(row);
  }
  return json{{"rmse_x", m.rmse_x},       {"acc_v", m.acc_v},
              {"acc_d", m.acc_d},         {"count", m.count},
              {"speed_classes", m.speed_classes}, {"confusion_v", conf_v},
              {"confusion_d", conf_d}};
}

std::string history_csv(const est::TrainHistory& history) {
  std::ostringstream ss;
  ss << "epoch,total,mse_x,ce_v,ce_d\n";
  char buf[160];
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const est::EpochStats& s = history.epochs[e];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", e + 1, s.total, s.l1,
                  s.l2, s.l3);
    ss << buf;
  }
  return ss.str();
}

est::TrainConfig train_config_from(const RunConfig& config) {
  est::TrainConfig tc;
  tc.epochs = config.train.epochs;
  tc.batch_size = config.train.batch_size;
  tc.adam.lr = config.train.lr;
  tc.lambda = config.train.lambda;
  tc.seed = config.seed;
  return tc;
}

struct FitOutcome {
  est::Metrics metrics;
  est::TrainHistory history;
};

/// Shared by train/tune/ablate/sweep: fresh model from the seed's init
/// stream, trained, then measured on the test split.
FitOutcome fit_model(const est::ModelConfig& model_config, est::TrainConfig train_config,
                     const data::LabeledDataset& dataset, std::uint64_t seed,
                     nn::ParameterSet& params) {
  train_config.seed = seed;
  Rng root(seed);
  Rng init = root.fork(0xC);
  est::Estimator model(model_config, params, init);
  FitOutcome out;
  out.history = est::train(model, params, dataset, train_config);
  out.metrics = est::evaluate(model, dataset, dataset.test_indices);
  return out;
}

std::vector<double> case_ys(const RunConfig& config, std::optional<int> case_filter) {
  if (case_filter && *case_filter != 1 && *case_filter != 2)
    throw ConfigError("case must be 1 or 2");
  std::vector<double> ys;
  if (!case_filter || *case_filter == 1) ys.push_back(config.sim.y_case1_mm);
  if (!case_filter || *case_filter == 2) ys.push_back(config.sim.y_case2_mm);
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  return ys;
}

/// Builds the dataset from already-loaded traces with config's knobs.
data::LabeledDataset dataset_from_traces(const RunConfig& config,
                                         const std::vector<sim::PressureTrace>& traces,
                                         std::size_t* skipped_short) {
  data::DatasetOptions options;
  options.sl = config.data.sl;
  options.stride = config.data.stride;
  options.clip_mm = config.data.clip_mm;
  options.baseline_len = config.data.baseline_len;
  options.split_ratio = config.data.split_ratio;
  options.split_seed = config.seed;
  options.speeds_mms = config.sim.speeds_mms;
  data::LabeledDataset dataset = data::build_dataset(traces, options, skipped_short);
  dataset.config_hash = config_hash(config);
  return dataset;
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n == 0) throw std::logic_error("median of empty set");
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// Fixed-width loss curve for the report; epochs resampled to the chart
/// width, values mapped linearly between the observed min and max.
std::string ascii_chart(const std::string& title, const std::vector<double>& values,
                        std::size_t width = 64, std::size_t height = 16) {
  std::ostringstream ss;
  ss << title << "\n";
  if (values.empty()) {
    ss << "  (no epochs)\n";
    return ss.str();
  }
  const std::size_t n = values.size();
  if (width > n) width = n;
  std::vector<double> cols(width);
  for (std::size_t c = 0; c < width; ++c)
    cols[c] = values[width == 1 ? 0 : c * (n - 1) / (width - 1)];
  double lo = *std::min_element(cols.begin(), cols.end());
  double hi = *std::max_element(cols.begin(), cols.end());
  if (hi == lo) hi = lo + 1.0;
  std::vector<std::string> grid(height, std::string(width, ' '));
  for (std::size_t c = 0; c < width; ++c) {
    const double t = (hi - cols[c]) / (hi - lo);
    auto r = static_cast<std::size_t>(std::lround(t * static_cast<double>(height - 1)));
    grid[std::min(r, height - 1)][c] = '*';
  }
  char label[32];
  for (std::size_t r = 0; r < height; ++r) {
    if (r == 0)
      std::snprintf(label, sizeof(label), "%10.4g |", hi);
    else if (r == height - 1)
      std::snprintf(label, sizeof(label), "%10.4g |", lo);
    else
      std::snprintf(label, sizeof(label), "%10s |", "");
    ss << label << grid[r] << "\n";
  }
  ss << std::string(11, ' ') << '+' << std::string(width, '-') << "\n";
  ss << std::string(12, ' ') << "epoch 1.." << n << "\n";
  return ss.str();
}

}  // namespace

std::vector<sim::Scenario> scenario_grid_for(const RunConfig& config,
                                             std::optional<int> case_filter) {
  return sim::scenario_grid(case_ys(config, case_filter), config.sim.speeds_mms,
                            {sim::Direction::P, sim::Direction::N}, config.base_scenario());
}

std::vector<sim::PressureTrace> corpus_for(const RunConfig& config,
                                           std::optional<int> case_filter) {
  if (config.data.corpus_dir.empty()) {
    return sim::generate_corpus(scenario_grid_for(config, case_filter), config.sim.geometry,
                                config.sim.wake, config.sim.repeats, config.seed);
  }

  const fs::path dir = config.data.corpus_dir;
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw ConfigError("corpus_dir has no manifest.json (expected a gen output): " +
                      dir.string());
  const json manifest = read_json(manifest_path);
  if (manifest.value("command", "") != "gen")
    throw ConfigError("corpus_dir manifest was not written by gen: " + manifest_path.string());
  if (manifest.value("sim_hash", "") != sim_hash(config))
    throw ConfigError(
        "corpus_dir was generated from a different sim config or seed (sim_hash mismatch): " +
        dir.string());

  const std::vector<double> ys = case_ys(config, case_filter);
  std::vector<sim::PressureTrace> traces;
  for (const json& entry : manifest.at("traces")) {
    const double y = entry.at("y_mm").get<double>();
    if (std::find(ys.begin(), ys.end(), y) == ys.end()) continue;
    const fs::path file = dir / entry.at("file").get<std::string>();
    const std::string csv = read_text(file);
    if (hex16(fnv1a64(csv)) != entry.at("hash").get<std::string>())
      throw std::runtime_error("corpus trace corrupted (hash mismatch): " + file.string());
    traces.push_back(sim::trace_from_csv(csv));
  }
  return traces;
}

data::LabeledDataset dataset_for(const RunConfig& config, std::size_t* skipped_short) {
  for (const sim::Scenario& sc : scenario_grid_for(config, config.case_id)) {
    try {
      sim::validate_for_windowing(sc, config.data.sl);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  const std::vector<sim::PressureTrace> traces = corpus_for(config, config.case_id);
  if (traces.empty())
    throw ConfigError("no traces for case " + std::to_string(config.case_id) +
                      " in corpus_dir " + config.data.corpus_dir);
  return dataset_from_traces(config, traces, skipped_short);
}

GenOutcome cmd_gen(const RunConfig& config, const fs::path& out,
                   std::optional<int> case_filter) {
  config.validate();
  StopWatch total;
  fs::create_directories(out);
  save_config(out / "config.json", config);

  const std::vector<sim::Scenario> scenarios = scenario_grid_for(config, case_filter);
  const std::vector<sim::PressureTrace> traces = sim::generate_corpus(
      scenarios, config.sim.geometry, config.sim.wake, config.sim.repeats, config.seed);

  json entries = json::array();
  std::uint64_t folded = fnv1a64("wks-corpus");
  for (std::size_t i = 0; i < traces.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "trace_%05zu.csv", i);
    const std::string csv = sim::trace_to_csv(traces[i]);
    write_text(out / name, csv);
    const std::uint64_t h = fnv1a64(csv);
    folded = fnv1a64_mix(folded, h);
    const sim::Scenario& sc = scenarios[i / config.sim.repeats];
    entries.push_back(json{{"file", name},
                           {"y_mm", sc.y_mm},
                           {"speed_mms", sc.speed_mms},
                           {"dir", std::string(1, sim::direction_char(sc.dir))},
                           {"repeat", i % config.sim.repeats},
                           {"samples", traces[i].size()},
                           {"hash", hex16(h)}});
  }

  json manifest = manifest_base(config, "gen");
  manifest["case"] = case_filter ? json(*case_filter) : json("both");
  manifest["sim_hash"] = sim_hash(config);
  manifest["repeats"] = config.sim.repeats;
  manifest["scenarios"] = scenarios.size();
  manifest["traces"] = entries;
  manifest["manifest_hash"] = hex16(folded);
  write_json(out / "manifest.json", manifest);
  write_json(out / "timings.json",
             json{{"command", "gen"}, {"total_s", total.seconds()}});

  GenOutcome outcome;
  outcome.traces = traces.size();
  outcome.manifest_hash = hex16(folded);
  outcome.manifest_path = out / "manifest.json";
  std::cout << "gen: " << outcome.traces << " traces -> " << out.string()
            << " (manifest " << outcome.manifest_hash << ")\n";
  return outcome;
}

TrainOutcome cmd_train(const RunConfig& config, const fs::path& out) {
  config.validate();
  StopWatch total;
  fs::create_directories(out);
  save_config(out / "config.json", config);

  StopWatch data_watch;
  std::size_t skipped = 0;
  const data::LabeledDataset dataset = dataset_for(config, &skipped);
  const double data_s = data_watch.seconds();
  data::write_dataset(out / "dataset.bin", dataset);

  const est::ModelConfig model_config = config.resolved_model();
  est::TrainConfig train_config = train_config_from(config);
  train_config.log = &std::cout;

  nn::ParameterSet params;
  StopWatch train_watch;
  const FitOutcome fit = fit_model(model_config, train_config, dataset, config.seed, params);
  const double train_s = train_watch.seconds();
  params.save(out / "checkpoint.bin");
  write_text(out / "history.csv", history_csv(fit.history));

  const double fit_value = est::fitness(fit.metrics);
  json metrics_doc{{"case", config.case_id},
                   {"config_hash", config_hash(config)},
                   {"seed", config.seed},
                   {"metrics", metrics_to_json(fit.metrics)},
                   {"fitness", fit_value},
                   {"dataset",
                    json{{"windows", dataset.samples.size()},
                         {"train", dataset.train_indices.size()},
                         {"test", dataset.test_indices.size()},
                         {"skipped_traces", skipped}}},
                   {"history",
                    json{{"epochs", fit.history.epochs.size()},
                         {"completed_epochs", fit.history.completed_epochs},
                         {"diverged", fit.history.diverged},
                         {"final_loss", fit.history.epochs.empty()
                                            ? 0.0
                                            : fit.history.epochs.back().total}}}};
  write_json(out / "metrics.json", metrics_doc);

  json manifest = manifest_base(config, "train");
  manifest["sim_hash"] = sim_hash(config);
  manifest["dataset"] = json{{"windows", dataset.samples.size()},
                             {"train", dataset.train_indices.size()},
                             {"test", dataset.test_indices.size()},
                             {"skipped_traces", skipped},
                             {"sl", dataset.sl},
                             {"sensors", dataset.sensors},
                             {"speed_set", dataset.speed_set}};
  manifest["model"] = json{{"cnn_only", model_config.cnn_only},
                           {"trainable_parameters", params.trainable_parameters()},
                           {"total_parameters", params.total_parameters()}};
  manifest["artifacts"] = json::array(
      {"config.json", "dataset.bin", "checkpoint.bin", "metrics.json", "history.csv"});
  write_json(out / "manifest.json", manifest);
  write_json(out / "timings.json", json{{"command", "train"},
                                        {"dataset_s", data_s},
                                        {"train_s", train_s},
                                        {"total_s", total.seconds()}});

  if (fit.history.diverged)
    std::cout << "train: diverged after epoch " << fit.history.completed_epochs
              << "; parameters rolled back\n";
  char line[256];
  std::snprintf(line, sizeof(line),
                "train: case %d  rmse_x %.4f  acc_v %.4f  acc_d %.4f  fitness %.4f\n",
                config.case_id, fit.metrics.rmse_x, fit.metrics.acc_v, fit.metrics.acc_d,
                fit_value);
  std::cout << line;

  TrainOutcome outcome;
  outcome.metrics = fit.metrics;
  outcome.history = fit.history;
  outcome.fitness = fit_value;
  outcome.windows = dataset.samples.size();
  outcome.train_count = dataset.train_indices.size();
  outcome.test_count = dataset.test_indices.size();
  outcome.skipped_traces = skipped;
  return outcome;
}

EvalOutcome cmd_eval(const fs::path& run_dir) {
  for (const char* name : {"config.json", "dataset.bin", "checkpoint.bin", "metrics.json"})
    if (!fs::exists(run_dir / name))
      throw ConfigError("missing " + std::string(name) +
                        " (expected a train run directory): " + run_dir.string());

  const RunConfig config = load_config(run_dir / "config.json");
  config.validate();
  const data::LabeledDataset dataset = data::read_dataset(run_dir / "dataset.bin");
  const est::ModelConfig model_config = config.resolved_model();
  if (model_config.sl != dataset.sl || model_config.sensors != dataset.sensors ||
      model_config.speed_classes != static_cast<std::size_t>(dataset.num_speed_classes()))
    throw std::runtime_error("stored dataset does not match the stored config: " +
                             run_dir.string());

  nn::ParameterSet params;
  Rng root(config.seed);
  Rng init = root.fork(0xC);
  est::Estimator model(model_config, params, init);
  params.load(run_dir / "checkpoint.bin");

  StopWatch watch;
  EvalOutcome outcome;
  outcome.metrics = est::evaluate(model, dataset, dataset.test_indices);
  const double eval_s = watch.seconds();

  const json stored = read_json(run_dir / "metrics.json");
  const json fresh = metrics_to_json(outcome.metrics);
  outcome.matches_stored = stored.contains("metrics") && stored.at("metrics") == fresh &&
                           stored.contains("fitness") &&
                           stored.at("fitness") == json(est::fitness(outcome.metrics));

  write_json(run_dir / "metrics_eval.json",
             json{{"metrics", fresh},
                  {"fitness", est::fitness(outcome.metrics)},
                  {"matches_stored", outcome.matches_stored}});
  json manifest = manifest_base(config, "eval");
  manifest["matches_stored"] = outcome.matches_stored;
  write_json(run_dir / "manifest_eval.json", manifest);
  write_json(run_dir / "timings_eval.json",
             json{{"command", "eval"}, {"eval_s", eval_s}});

  if (!outcome.matches_stored)
    throw std::runtime_error("eval did not reproduce the stored metrics: " +
                             (run_dir / "metrics_eval.json").string());
  char line[160];
  std::snprintf(line, sizeof(line),
                "eval: rmse_x %.4f  acc_v %.4f  acc_d %.4f  (matches stored run)\n",
                outcome.metrics.rmse_x, outcome.metrics.acc_v, outcome.metrics.acc_d);
  std::cout << line;
  return outcome;
}

TuneOutcome cmd_tune(const RunConfig& config, const fs::path& out) {
  config.validate();
  StopWatch total;
  fs::create_directories(out);
  save_config(out / "config.json", config);

  const data::LabeledDataset dataset = dataset_for(config);

  opt::TuneConfig tune_config;
  tune_config.woa.population = config.tune.population;
  tune_config.woa.iterations = config.tune.iterations;
  tune_config.woa.spiral_b = config.tune.spiral_b;
  tune_config.woa.seed = Rng(config.seed).fork(0xD).next_u64();
  tune_config.woa.lower.assign(3, config.tune.lambda_min);
  tune_config.woa.upper.assign(3, config.tune.lambda_max);
  tune_config.train = train_config_from(config);
  tune_config.train.epochs = config.tune.proxy_epochs;
  tune_config.model = config.resolved_model();
  tune_config.model_seed = config.seed;

  json eval_log = json::array();
  tune_config.on_evaluation = [&eval_log](const std::vector<double>& lambda, double fitness,
                                          double seconds) {
    char line[200];
    std::snprintf(line, sizeof(line),
                  "tune eval  lambda (%.4f, %.4f, %.4f)  fitness %.4f  (%.1fs)\n", lambda[0],
                  lambda[1], lambda[2], fitness, seconds);
    std::cout << line;
    eval_log.push_back(
        json{{"lambda", lambda}, {"fitness", fitness}, {"seconds", seconds}});
  };

  StopWatch search_watch;
  const opt::TuneResult search = opt::tune_task_weights(dataset, tune_config);
  const double search_s = search_watch.seconds();

  est::TrainConfig full_config = train_config_from(config);
  full_config.lambda = search.best_lambda;
  nn::ParameterSet tuned_params;
  StopWatch full_watch;
  const FitOutcome tuned =
      fit_model(config.resolved_model(), full_config, dataset, config.seed, tuned_params);
  const double full_s = full_watch.seconds();
  const double tuned_fitness = est::fitness(tuned.metrics);

  Rng baseline_rng = Rng(config.seed).fork(0xE);
  std::vector<std::array<double, 3>> baseline_lambdas;
  std::vector<double> baseline_fitness;
  std::vector<double> baseline_seconds;
  for (std::size_t r = 0; r < config.tune.baselines; ++r) {
    std::array<double, 3> lambda{};
    for (double& l : lambda)
      l = baseline_rng.uniform(config.tune.lambda_min, config.tune.lambda_max);
    est::TrainConfig baseline_config = train_config_from(config);
    baseline_config.lambda = lambda;
    nn::ParameterSet params;
    StopWatch watch;
    const FitOutcome fit =
        fit_model(config.resolved_model(), baseline_config, dataset, config.seed, params);
    baseline_seconds.push_back(watch.seconds());
    baseline_lambdas.push_back(lambda);
    baseline_fitness.push_back(est::fitness(fit.metrics));
    char line[200];
    std::snprintf(line, sizeof(line),
                  "tune baseline %zu/%zu  lambda (%.4f, %.4f, %.4f)  fitness %.4f\n", r + 1,
                  config.tune.baselines, lambda[0], lambda[1], lambda[2],
                  baseline_fitness.back());
    std::cout << line;
  }
  const double baseline_median = median_of(baseline_fitness);

  TuneOutcome outcome;
  outcome.best_lambda = search.best_lambda;
  outcome.search_fitness = search.best_fitness;
  outcome.tuned_full_fitness = tuned_fitness;
  outcome.baseline_fitness = baseline_fitness;
  outcome.baseline_median = baseline_median;
  outcome.tuned_le_median = tuned_fitness <= baseline_median;
  outcome.evaluations = search.woa.evaluations;
  outcome.cache_hits = search.woa.cache_hits;

  json iterations = json::array();
  for (const opt::WoaIteration& it : search.woa.trace)
    iterations.push_back(json{{"iteration", it.iteration},
                              {"positions", it.positions},
                              {"fitness", it.fitness},
                              {"best", it.best},
                              {"best_fitness", it.best_fitness}});
  json report = manifest_base(config, "tune");
  report["search"] = json{{"best_lambda", search.best_lambda},
                          {"best_fitness", search.best_fitness},
                          {"proxy_epochs", config.tune.proxy_epochs},
                          {"evaluations", search.woa.evaluations},
                          {"cache_hits", search.woa.cache_hits},
                          {"iterations", iterations}};
  report["full"] = json{{"lambda", search.best_lambda},
                        {"fitness", tuned_fitness},
                        {"metrics", metrics_to_json(tuned.metrics)}};
  report["baselines"] = json{{"lambda", baseline_lambdas},
                             {"fitness", baseline_fitness},
                             {"median", baseline_median},
                             {"tuned_le_median", outcome.tuned_le_median}};
  write_json(out / "report.json", report);
  write_json(out / "timings.json", json{{"command", "tune"},
                                        {"search_s", search_s},
                                        {"full_train_s", full_s},
                                        {"baseline_s", baseline_seconds},
                                        {"evaluations", eval_log},
                                        {"total_s", total.seconds()}});

  char line[240];
  std::snprintf(line, sizeof(line),
                "tune: best lambda (%.4f, %.4f, %.4f)  full fitness %.4f  baseline median "
                "%.4f  (%s)\n",
                outcome.best_lambda[0], outcome.best_lambda[1], outcome.best_lambda[2],
                tuned_fitness, baseline_median,
                outcome.tuned_le_median ? "tuned <= median" : "tuned > median");
  std::cout << line;
  return outcome;
}

AblateOutcome cmd_ablate(const RunConfig& config, const fs::path& out) {
  config.validate();
  StopWatch total;
  fs::create_directories(out);
  save_config(out / "config.json", config);

  const data::LabeledDataset dataset = dataset_for(config);
  est::ModelConfig hybrid_config = config.resolved_model();
  hybrid_config.cnn_only = false;
  est::ModelConfig cnn_config = config.resolved_model();
  cnn_config.cnn_only = true;
  const est::TrainConfig train_config = train_config_from(config);

  AblateOutcome outcome;
  json rows = json::array();
  json seconds = json::array();
  std::size_t hybrid_parameters = 0;
  std::size_t cnn_parameters = 0;
  for (const std::uint64_t seed : config.ablate.seeds) {
    AblateRow row;
    row.seed = seed;
    StopWatch hybrid_watch;
    nn::ParameterSet hybrid_params;
    row.hybrid = fit_model(hybrid_config, train_config, dataset, seed, hybrid_params).metrics;
    const double hybrid_s = hybrid_watch.seconds();
    StopWatch cnn_watch;
    nn::ParameterSet cnn_params;
    row.cnn_only = fit_model(cnn_config, train_config, dataset, seed, cnn_params).metrics;
    const double cnn_s = cnn_watch.seconds();
    hybrid_parameters = hybrid_params.trainable_parameters();
    cnn_parameters = cnn_params.trainable_parameters();

    outcome.rows.push_back(row);
    outcome.mean_fitness_hybrid += est::fitness(row.hybrid);
    outcome.mean_fitness_cnn_only += est::fitness(row.cnn_only);
    rows.push_back(json{{"seed", seed},
                        {"hybrid", metrics_to_json(row.hybrid)},
                        {"hybrid_fitness", est::fitness(row.hybrid)},
                        {"cnn_only", metrics_to_json(row.cnn_only)},
                        {"cnn_only_fitness", est::fitness(row.cnn_only)}});
    seconds.push_back(json{{"seed", seed}, {"hybrid_s", hybrid_s}, {"cnn_only_s", cnn_s}});
    char line[200];
    std::snprintf(line, sizeof(line),
                  "ablate seed %llu  hybrid fitness %.4f  cnn-only fitness %.4f\n",
                  static_cast<unsigned long long>(seed), est::fitness(row.hybrid),
                  est::fitness(row.cnn_only));
    std::cout << line;
  }
  const auto n = static_cast<double>(outcome.rows.size());
  outcome.mean_fitness_hybrid /= n;
  outcome.mean_fitness_cnn_only /= n;
  outcome.hybrid_not_worse = outcome.mean_fitness_hybrid <= outcome.mean_fitness_cnn_only;

  json report = manifest_base(config, "ablate");
  report["rows"] = rows;
  report["mean_fitness"] = json{{"hybrid", outcome.mean_fitness_hybrid},
                                {"cnn_only", outcome.mean_fitness_cnn_only}};
  report["hybrid_not_worse"] = outcome.hybrid_not_worse;
  report["trainable_parameters"] =
      json{{"hybrid", hybrid_parameters}, {"cnn_only", cnn_parameters}};
  write_json(out / "ablate.json", report);
  write_json(out / "timings.json", json{{"command", "ablate"},
                                        {"fits", seconds},
                                        {"total_s", total.seconds()}});

  char line[200];
  std::snprintf(line, sizeof(line),
                "ablate: mean fitness hybrid %.4f  cnn-only %.4f  (%s)\n",
                outcome.mean_fitness_hybrid, outcome.mean_fitness_cnn_only,
                outcome.hybrid_not_worse ? "hybrid not worse" : "hybrid worse");
  std::cout << line;
  return outcome;
}

SweepOutcome cmd_sweep_seqlen(const RunConfig& config, const fs::path& out) {
  config.validate();
  StopWatch total;
  fs::create_directories(out);
  save_config(out / "config.json", config);

  std::vector<std::size_t> sls = config.sweep.sls;
  std::sort(sls.begin(), sls.end());
  const std::vector<std::uint64_t> seeds =
      config.sweep.seeds.empty() ? std::vector<std::uint64_t>{config.seed} : config.sweep.seeds;

  const std::vector<sim::PressureTrace> traces = corpus_for(config, config.case_id);
  if (traces.empty())
    throw ConfigError("no traces for case " + std::to_string(config.case_id) +
                      " in corpus_dir " + config.data.corpus_dir);

  SweepOutcome outcome;
  json seconds = json::array();
  for (const std::size_t sl : sls) {
    RunConfig sl_config = config;
    sl_config.data.sl = sl;
    sl_config.validate();
    for (const sim::Scenario& sc : scenario_grid_for(sl_config, sl_config.case_id)) {
      try {
        sim::validate_for_windowing(sc, sl);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    const data::LabeledDataset dataset = dataset_from_traces(sl_config, traces, nullptr);
    const est::ModelConfig model_config = sl_config.resolved_model();
    const est::TrainConfig train_config = train_config_from(sl_config);
    for (const std::uint64_t seed : seeds) {
      nn::ParameterSet params;
      StopWatch watch;
      const FitOutcome fit = fit_model(model_config, train_config, dataset, seed, params);
      SweepRow row;
      row.sl = sl;
      row.seed = seed;
      row.metrics = fit.metrics;
      row.fitness = est::fitness(fit.metrics);
      outcome.rows.push_back(row);
      seconds.push_back(
          json{{"sl", sl}, {"seed", seed}, {"fit_s", watch.seconds()}});
      char line[200];
      std::snprintf(line, sizeof(line), "sweep sl %zu  seed %llu  fitness %.4f\n", sl,
                    static_cast<unsigned long long>(seed), row.fitness);
      std::cout << line;
    }
  }
  std::stable_sort(outcome.rows.begin(), outcome.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) {
                     return a.sl != b.sl ? a.sl < b.sl : a.seed < b.seed;
                   });
  for (const std::size_t sl : sls) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const SweepRow& row : outcome.rows)
      if (row.sl == sl) {
        sum += row.fitness;
        ++count;
      }
    if (count > 0)
      outcome.mean_fitness_by_sl.emplace_back(sl, sum / static_cast<double>(count));
  }

  json rows = json::array();
  for (const SweepRow& row : outcome.rows)
    rows.push_back(json{{"sl", row.sl},
                        {"seed", row.seed},
                        {"metrics", metrics_to_json(row.metrics)},
                        {"fitness", row.fitness}});
  json means = json::array();
  for (const auto& [sl, mean] : outcome.mean_fitness_by_sl)
    means.push_back(json{{"sl", sl}, {"mean_fitness", mean}});
  json report = manifest_base(config, "sweep-seqlen");
  report["rows"] = rows;
  report["mean_fitness_by_sl"] = means;
  write_json(out / "sweep.json", report);
  write_json(out / "timings.json", json{{"command", "sweep-seqlen"},
                                        {"fits", seconds},
                                        {"total_s", total.seconds()}});

  std::ostringstream table;
  table << "sl    seed        rmse_x   acc_v    acc_d    fitness\n";
  char line[200];
  for (const SweepRow& row : outcome.rows) {
    std::snprintf(line, sizeof(line), "%-5zu %-11llu %-8.4f %-8.4f %-8.4f %-8.4f\n", row.sl,
                  static_cast<unsigned long long>(row.seed), row.metrics.rmse_x,
                  row.metrics.acc_v, row.metrics.acc_d, row.fitness);
    table << line;
  }
  table << "\nmean fitness by sl\n";
  for (const auto& [sl, mean] : outcome.mean_fitness_by_sl) {
    std::snprintf(line, sizeof(line), "%-5zu %.4f\n", sl, mean);
    table << line;
  }
  write_text(out / "sweep.txt", table.str());
  std::cout << table.str();
  return outcome;
}

ReportOutcome cmd_report(const std::vector<fs::path>& run_dirs, const fs::path& out) {
  if (run_dirs.empty())
    throw ConfigError("report needs at least one run directory; usage: wakesense report DIR... --out DIR");
  fs::create_directories(out);

  struct RunRow {
    std::string dir;
    int case_id = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
    double rmse_x = 0.0;
    double acc_v = 0.0;
    double acc_d = 0.0;
    double fitness = 0.0;
  };
  std::vector<RunRow> rows;
  std::vector<std::vector<double>> losses;
  for (const fs::path& dir : run_dirs) {
    const fs::path metrics_path = dir / "metrics.json";
    if (!fs::exists(metrics_path))
      throw ConfigError("no metrics.json in '" + dir.string() +
                        "' (expected train run directories)");
    const json doc = read_json(metrics_path);
    RunRow row;
    row.dir = dir.string();
    row.case_id = doc.value("case", 0);
    row.seed = doc.value("seed", std::uint64_t{0});
    row.config_hash = doc.value("config_hash", "");
    const json& m = doc.at("metrics");
    row.rmse_x = m.at("rmse_x").get<double>();
    row.acc_v = m.at("acc_v").get<double>();
    row.acc_d = m.at("acc_d").get<double>();
    row.fitness = doc.at("fitness").get<double>();
    rows.push_back(row);

    std::vector<double> total;
    const fs::path history_path = dir / "history.csv";
    if (fs::exists(history_path)) {
      std::istringstream in(read_text(history_path));
      std::string csv_line;
      std::getline(in, csv_line);  // header
      while (std::getline(in, csv_line)) {
        double epoch = 0.0, loss = 0.0;
        if (std::sscanf(csv_line.c_str(), "%lf,%lf", &epoch, &loss) == 2)
          total.push_back(loss);
      }
    }
    losses.push_back(std::move(total));
  }

  const auto n = static_cast<double>(rows.size());
  auto aggregate = [&](auto getter) {
    double mean = 0.0;
    for (const RunRow& row : rows) mean += getter(row);
    mean /= n;
    double var = 0.0;
    for (const RunRow& row : rows) {
      const double d = getter(row) - mean;
      var += d * d;
    }
    const double stddev = rows.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    return json{{"mean", mean}, {"std", stddev}};
  };
  json agg{{"rmse_x", aggregate([](const RunRow& r) { return r.rmse_x; })},
           {"acc_v", aggregate([](const RunRow& r) { return r.acc_v; })},
           {"acc_d", aggregate([](const RunRow& r) { return r.acc_d; })},
           {"fitness", aggregate([](const RunRow& r) { return r.fitness; })}};

  json runs = json::array();
  for (const RunRow& row : rows)
    runs.push_back(json{{"dir", row.dir},
                        {"case", row.case_id},
                        {"seed", row.seed},
                        {"config_hash", row.config_hash},
                        {"rmse_x", row.rmse_x},
                        {"acc_v", row.acc_v},
                        {"acc_d", row.acc_d},
                        {"fitness", row.fitness}});
  write_json(out / "summary.json", json{{"command", "report"},
                                        {"versions", versions_json()},
                                        {"runs", runs},
                                        {"aggregate", agg}});

  fs::create_directories(out / "charts");
  std::ostringstream text;
  text << "wakesense report - " << rows.size() << " run(s)\n\n";
  text << "run                                      case  seed        rmse_x   acc_v    acc_d    fitness\n";
  char line[320];
  for (const RunRow& row : rows) {
    std::snprintf(line, sizeof(line), "%-40s %-5d %-11llu %-8.4f %-8.4f %-8.4f %-8.4f\n",
                  row.dir.c_str(), row.case_id,
                  static_cast<unsigned long long>(row.seed), row.rmse_x, row.acc_v,
                  row.acc_d, row.fitness);
    text << line;
  }
  auto fmt_pm = [](const json& j) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f +/- %.4f", j.at("mean").get<double>(),
                  j.at("std").get<double>());
    return std::string(buf);
  };
  text << "\naggregate (mean +/- sample std over " << rows.size() << " run(s))\n";
  text << "  rmse_x  " << fmt_pm(agg["rmse_x"]) << "\n";
  text << "  acc_v   " << fmt_pm(agg["acc_v"]) << "\n";
  text << "  acc_d   " << fmt_pm(agg["acc_d"]) << "\n";
  text << "  fitness " << fmt_pm(agg["fitness"]) << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (losses[i].empty()) continue;
    char name[40];
    std::snprintf(name, sizeof(name), "run_%02zu_loss.txt", i);
    const std::string chart = ascii_chart("total training loss - " + rows[i].dir, losses[i]);
    write_text(out / "charts" / name, chart);
    text << "\n" << chart;
  }
  write_text(out / "summary.txt", text.str());
  std::cout << text.str();

  ReportOutcome outcome;
  outcome.runs = rows.size();
  outcome.summary_path = out / "summary.txt";
  return outcome;
}

}  // namespace wks::cli
