// Acceptance harness: one self-contained check per release criterion,
// each reporting a single "criterion N: pass|fail - detail" line.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "wks/dataset.hpp"
#include "wks/grad_check.hpp"
#include "wks/losses.hpp"
#include "wks/model.hpp"
#include "wks/rng.hpp"
#include "wks/run_config.hpp"
#include "wks/trainer.hpp"
#include "wks/woa.hpp"
#include "wks/workflows.hpp"

namespace fs = std::filesystem;
using namespace wks;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

/// The workflows narrate progress on stdout; keep the acceptance output to
/// one line per criterion by swallowing everything they print.
class Silencer {
 public:
  Silencer() : saved_(std::cout.rdbuf(buffer_.rdbuf())) {}
  ~Silencer() { std::cout.rdbuf(saved_); }

 private:
  std::ostringstream buffer_;
  std::streambuf* saved_;
};

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

fs::path work_dir(const std::string& name) {
  fs::path dir = fs::path("tmp_acceptance") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

est::ModelConfig tiny_model() {
  est::ModelConfig c;
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

/// Reduced-cost run used by the comparative criteria (ablation, window
/// sweep, weight tuning): a thinner corpus and shorter schedule that keeps
/// each full training around ten seconds.
cli::RunConfig reduced_config() {
  cli::RunConfig c;
  c.seed = 1;
  c.sim.repeats = 3;
  c.data.stride = 4;
  c.train.epochs = 30;
  return c;
}

// --- criterion 1: gradient check on the tiny estimator ----------------

Outcome criterion1() {
  Timer timer;
  est::ModelConfig config = tiny_model();
  nn::ParameterSet params;
  Rng init(21);
  est::Estimator model(config, params, init);

  Rng data_rng(22);
  nn::Tensor x = nn::Tensor::uniform({3, config.sl, config.sensors}, 1.0, data_rng);
  std::vector<double> tx{0.3, -0.6, 0.1};
  std::vector<int> tv{0, 2, 1};
  std::vector<int> td{1, 0, 1};

  Rng drop(23);
  model.freeze_dropout(true);
  model.forward(x, nn::Mode::kTrain, &drop);

  auto loss = [&] {
    est::Output out = model.forward(x, nn::Mode::kTrain, &drop);
    return nn::mse_loss(out.x, tx, nullptr) + nn::softmax_cross_entropy(out.v_logits, tv, nullptr) +
           nn::softmax_cross_entropy(out.d_logits, td, nullptr);
  };
  auto backward = [&] {
    params.zero_grads();
    est::Output out = model.forward(x, nn::Mode::kTrain, &drop);
    nn::Tensor gx, gv, gd;
    nn::mse_loss(out.x, tx, &gx);
    nn::softmax_cross_entropy(out.v_logits, tv, &gv);
    nn::softmax_cross_entropy(out.d_logits, td, &gd);
    model.backward(gx, gv, gd);
  };
  nn::GradCheckReport report = nn::check_gradients(params, loss, backward);

  const double secs = timer.seconds();
  const bool pass = report.max_rel_error < 1e-4 && secs < 120.0;
  return {pass, fmt("max relative gradient error %.3e (tolerance 1e-4) over %zu parameters in "
                    "%.1fs (budget 120s), worst %s",
                    report.max_rel_error, params.trainable_parameters(), secs,
                    report.worst_param.c_str())};
}

// --- criterion 2: loss oracles against scalar reference loops ---------

Outcome criterion2() {
  Rng rng(31);
  nn::Tensor logits = nn::Tensor::uniform({7, 5}, 3.0, rng);
  std::vector<int> labels;
  for (std::size_t i = 0; i < 7; ++i) labels.push_back(static_cast<int>(rng.below(5)));

  double ce_ref = 0.0;
  for (std::size_t i = 0; i < 7; ++i) {
    double mx = logits[i * 5];
    for (std::size_t k = 1; k < 5; ++k) mx = std::max(mx, logits[i * 5 + k]);
    double lse = 0.0;
    for (std::size_t k = 0; k < 5; ++k) lse += std::exp(logits[i * 5 + k] - mx);
    ce_ref += mx + std::log(lse) - logits[i * 5 + static_cast<std::size_t>(labels[i])];
  }
  ce_ref /= 7.0;
  const double ce = nn::softmax_cross_entropy(logits, labels, nullptr);

  nn::Tensor pred = nn::Tensor::uniform({9, 1}, 2.0, rng);
  std::vector<double> targets;
  for (std::size_t i = 0; i < 9; ++i) targets.push_back(rng.uniform(-2.0, 2.0));
  double mse_ref = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    mse_ref += (pred[i] - targets[i]) * (pred[i] - targets[i]);
  }
  mse_ref /= 9.0;
  const double mse = nn::mse_loss(pred, targets, nullptr);

  // fixed oracles on top of the random comparison
  nn::Tensor uniform({2, 4});
  const double ce_uniform = nn::softmax_cross_entropy(uniform, {1, 3}, nullptr);
  nn::Tensor two = nn::Tensor::from({2, 1}, {1.0, 2.0});
  const double mse_two = nn::mse_loss(two, {0.0, 0.0}, nullptr);

  const double worst =
      std::max({std::abs(ce - ce_ref), std::abs(mse - mse_ref),
                std::abs(ce_uniform - std::log(4.0)), std::abs(mse_two - 2.5)});
  return {worst < 1e-10,
          fmt("largest deviation from scalar reference %.3e (tolerance 1e-10)", worst)};
}

// --- criterion 3: memorize 32 windows perfectly -----------------------

Outcome criterion3() {
  Timer timer;
  // 32 windows of the real case-1 dataset (thin corpus: one repeat), with
  // the full-size estimator and a memorization-friendly learning rate
  cli::RunConfig config;
  config.seed = 1;
  config.sim.repeats = 1;
  data::LabeledDataset ds = cli::dataset_for(config);
  std::vector<std::size_t> subset(ds.train_indices.begin(), ds.train_indices.begin() + 32);
  ds.train_indices = subset;
  ds.test_indices = subset;
  ds.norm = data::compute_norm_stats(ds);

  nn::ParameterSet params;
  Rng init = Rng(config.seed).fork(0xC);
  est::Estimator model(config.resolved_model(), params, init);
  est::TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 64;  // one batch per epoch
  tc.adam.lr = 1e-3;
  tc.seed = config.seed;
  est::TrainHistory history = est::train(model, params, ds, tc);
  est::Metrics m = est::evaluate(model, ds, ds.train_indices);

  const double secs = timer.seconds();
  const bool pass = !history.diverged && m.acc_v == 1.0 && m.acc_d == 1.0 && m.rmse_x < 0.05 &&
                    secs < 300.0;
  return {pass, fmt("speed acc %.4f, direction acc %.4f (target 1.0 each), rmse %.4f "
                    "(limit 0.05) after 200 epochs in %.1fs (budget 300s)",
                    m.acc_v, m.acc_d, m.rmse_x, secs)};
}

// --- criterion 4: full-scale case 1 quality, case 2 degradation -------

Outcome criterion4() {
  cli::RunConfig config;
  config.seed = 1;

  Timer case1_timer;
  cli::TrainOutcome case1;
  {
    Silencer quiet;
    case1 = cli::cmd_train(config, work_dir("c4_case1"));
  }
  const double case1_secs = case1_timer.seconds();

  config.case_id = 2;
  cli::TrainOutcome case2;
  {
    Silencer quiet;
    case2 = cli::cmd_train(config, work_dir("c4_case2"));
  }

  const bool quality = case1.metrics.acc_d >= 0.95 && case1.metrics.acc_v >= 0.85 &&
                       case1.metrics.rmse_x <= 0.10 && case1_secs < 1800.0;
  const bool downstream = case2.metrics.rmse_x >= case1.metrics.rmse_x - 0.02;
  return {quality && downstream,
          fmt("case 1: direction acc %.4f (>=0.95), speed acc %.4f (>=0.85), rmse %.4f "
              "(<=0.10) in %.0fs (budget 1800s); case 2 rmse %.4f vs case 1 - 0.02 = %.4f",
              case1.metrics.acc_d, case1.metrics.acc_v, case1.metrics.rmse_x, case1_secs,
              case2.metrics.rmse_x, case1.metrics.rmse_x - 0.02)};
}

// --- criterion 5: recurrent branch earns its parameters ---------------

Outcome criterion5() {
  cli::RunConfig config = reduced_config();
  config.ablate.seeds = {1, 2, 3};
  cli::AblateOutcome outcome;
  {
    Silencer quiet;
    outcome = cli::cmd_ablate(config, work_dir("c5_ablate"));
  }
  return {outcome.hybrid_not_worse,
          fmt("mean fitness over 3 seeds: hybrid %.4f vs cnn-only %.4f (lower is better)",
              outcome.mean_fitness_hybrid, outcome.mean_fitness_cnn_only)};
}

// --- criterion 6: longer windows help --------------------------------

Outcome criterion6() {
  cli::RunConfig config = reduced_config();
  config.sweep.sls = {32, 80};
  config.sweep.seeds = {1, 2, 3};
  cli::SweepOutcome outcome;
  {
    Silencer quiet;
    outcome = cli::cmd_sweep_seqlen(config, work_dir("c6_sweep"));
  }
  double mean32 = 0.0, mean80 = 0.0;
  for (const auto& [sl, mean] : outcome.mean_fitness_by_sl) {
    if (sl == 32) mean32 = mean;
    if (sl == 80) mean80 = mean;
  }
  return {mean80 <= mean32,
          fmt("mean fitness over 3 seeds: sl=80 %.4f vs sl=32 %.4f (lower is better)", mean80,
              mean32)};
}

// --- criterion 7: whale optimizer on the sphere function --------------

Outcome criterion7() {
  Timer timer;
  opt::WoaConfig config;
  config.population = 20;
  config.iterations = 200;
  config.seed = 1234;
  config.lower.assign(3, -10.0);
  config.upper.assign(3, 10.0);
  auto sphere = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  opt::WoaResult result = opt::woa_optimize(sphere, config);

  bool monotone = true;
  for (std::size_t t = 1; t < result.trace.size(); ++t) {
    if (result.trace[t].best_fitness > result.trace[t - 1].best_fitness) monotone = false;
  }
  const double secs = timer.seconds();
  const bool pass = result.best_fitness < 1e-5 && monotone && secs < 10.0;
  return {pass, fmt("best sphere value %.3e (< 1e-5), best-so-far trace %s, %.2fs (budget 10s)",
                    result.best_fitness, monotone ? "monotone" : "NOT monotone", secs)};
}

// --- criterion 8: tuned task weights beat random ones -----------------

Outcome criterion8() {
  cli::RunConfig config = reduced_config();
  config.tune.population = 6;
  config.tune.iterations = 10;
  config.tune.proxy_epochs = 8;
  config.tune.baselines = 5;
  cli::TuneOutcome outcome;
  {
    Silencer quiet;
    outcome = cli::cmd_tune(config, work_dir("c8_tune"));
  }
  return {outcome.tuned_le_median,
          fmt("tuned lambda (%.3f, %.3f, %.3f) full fitness %.4f vs median of 5 random "
              "baselines %.4f",
              outcome.best_lambda[0], outcome.best_lambda[1], outcome.best_lambda[2],
              outcome.tuned_full_fitness, outcome.baseline_median)};
}

// --- criterion 9: bit-identical reruns through the CLI ----------------

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = std::string(WAKESENSE_CLI_PATH) + " " + args + " > " +
                          (dir / "stdout.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return status == -1 ? -1 : WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<missing " + path.string() + ">";
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion9() {
  fs::path dir = work_dir("c9_determinism");
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({
  "seed": 7,
  "sim": {"repeats": 1, "speeds_mms": [400, 800]},
  "data": {"sl": 16, "stride": 4},
  "model": {"conv1_filters": 8, "conv2_filters": 8, "lstm_hidden": 8, "shared_width": 16},
  "train": {"epochs": 2},
  "tune": {"population": 2, "iterations": 2, "proxy_epochs": 1, "baselines": 1},
  "ablate": {"seeds": [1]},
  "sweep": {"sls": [16, 24]}
})";
  }
  const std::string cfg = " --config " + (dir / "config.json").string();

  struct Step {
    std::string command;                // without --out
    std::vector<std::string> compare;   // deterministic artifacts
  };
  const std::vector<Step> steps{
      {"gen" + cfg, {"manifest.json", "trace_00000.csv"}},
      {"train" + cfg, {"metrics.json", "history.csv", "dataset.bin", "checkpoint.bin",
                       "manifest.json"}},
      {"ablate" + cfg, {"ablate.json"}},
      {"sweep-seqlen" + cfg, {"sweep.json", "sweep.txt"}},
      {"tune" + cfg, {"report.json"}},
  };

  std::size_t compared = 0;
  for (const auto& step : steps) {
    const std::string name = step.command.substr(0, step.command.find(' '));
    const fs::path first = dir / (name + "_1");
    const fs::path second = dir / (name + "_2");
    for (const fs::path& out : {first, second}) {
      if (run_cli(dir, step.command + " --out " + out.string()) != 0) {
        return {false, name + " exited non-zero: " + slurp(dir / "stdout.txt")};
      }
    }
    for (const std::string& artifact : step.compare) {
      if (slurp(first / artifact) != slurp(second / artifact)) {
        return {false, name + " rerun changed " + artifact};
      }
      ++compared;
    }
  }

  // eval and report consume train_1 twice; their outputs must agree too
  for (const char* pass : {"1", "2"}) {
    if (run_cli(dir, "eval --out " + (dir / "train_1").string()) != 0) {
      return {false, "eval exited non-zero on a fresh train run"};
    }
    fs::copy_file(dir / "train_1" / "metrics_eval.json",
                  dir / (std::string("metrics_eval_") + pass + ".json"));
    if (run_cli(dir, "report " + (dir / "train_1").string() + " --out " +
                         (dir / (std::string("report_") + pass)).string()) != 0) {
      return {false, "report exited non-zero"};
    }
  }
  if (slurp(dir / "metrics_eval_1.json") != slurp(dir / "metrics_eval_2.json")) {
    return {false, "eval rerun changed metrics_eval.json"};
  }
  ++compared;
  if (slurp(dir / "report_1" / "summary.json") != slurp(dir / "report_2" / "summary.json")) {
    return {false, "report rerun changed summary.json"};
  }
  ++compared;

  return {true, fmt("%zu artifacts byte-identical across reruns of gen, train, eval, ablate, "
                    "sweep-seqlen, tune and report",
                    compared)};
}

}  // namespace

int main(int argc, char** argv) {
  int selected = 0;  // 0: run all
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      selected = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: wks_acceptance [--criterion N]\n";
      return 2;
    }
  }

  const std::vector<std::function<Outcome()>> criteria{
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9};
  if (selected < 0 || selected > static_cast<int>(criteria.size())) {
    std::cerr << "usage: wks_acceptance [--criterion N] with N in 1.."
              << criteria.size() << "\n";
    return 2;
  }

  bool all_pass = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (selected != 0 && selected != static_cast<int>(i + 1)) continue;
    Outcome outcome;
    try {
      outcome = criteria[i]();
    } catch (const std::exception& e) {
      outcome = {false, std::string("unexpected exception: ") + e.what()};
    }
    std::cout << "criterion " << i + 1 << ": " << (outcome.pass ? "pass" : "fail") << " - "
              << outcome.detail << std::endl;
    all_pass = all_pass && outcome.pass;
  }
  return all_pass ? 0 : 1;
}
