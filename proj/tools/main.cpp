#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wks/errors.hpp"
#include "wks/run_config.hpp"
#include "wks/version.hpp"
#include "wks/workflows.hpp"

namespace {

/// Flags shared by the config-driven subcommands.
struct CommonArgs {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> sl;
  std::optional<int> case_id;
};

void add_common(CLI::App* sub, CommonArgs& args, const std::string& default_out,
                const std::string& case_help) {
  sub->add_option("--config", args.config_path,
                  "JSON run config; built-in defaults apply when omitted");
  sub->add_option("--out", args.out, "output directory")->default_val(default_out);
  sub->add_option("--seed", args.seed, "override the run seed");
  sub->add_option("--sl", args.sl, "override the window length");
  sub->add_option("--case", args.case_id, case_help)->check(CLI::Range(1, 2));
}

wks::cli::RunConfig effective_config(const CommonArgs& args) {
  wks::cli::RunConfig config;
  if (!args.config_path.empty()) config = wks::cli::load_config(args.config_path);
  wks::cli::CliOverrides overrides;
  overrides.seed = args.seed;
  overrides.sl = args.sl;
  overrides.case_id = args.case_id;
  wks::cli::apply_overrides(config, overrides);
  config.validate();
  return config;
}

std::string single_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wakesense - lateral motion estimation from distributed pressure sensing"};
  app.set_version_flag("--version", wks::kVersion);
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, tune_args, ablate_args, sweep_args;
  std::string eval_dir;
  std::vector<std::string> report_dirs;
  std::string report_out = "runs/report";

  CLI::App* gen = app.add_subcommand("gen", "simulate the pressure-trace corpus");
  add_common(gen, gen_args, "runs/gen", "generate only this case (default: both)");

  CLI::App* train = app.add_subcommand("train", "train the estimator and persist the run");
  add_common(train, train_args, "runs/train", "sensor placement case");

  CLI::App* eval = app.add_subcommand("eval", "re-evaluate a stored train run");
  eval->add_option("--out", eval_dir, "train run directory to evaluate")->required();

  CLI::App* tune = app.add_subcommand("tune", "tune the task weights with WOA");
  add_common(tune, tune_args, "runs/tune", "sensor placement case");

  CLI::App* ablate = app.add_subcommand("ablate", "compare hybrid vs CNN-only over seeds");
  add_common(ablate, ablate_args, "runs/ablate", "sensor placement case");

  CLI::App* sweep = app.add_subcommand("sweep-seqlen", "train across window lengths");
  add_common(sweep, sweep_args, "runs/sweep-seqlen", "sensor placement case");

  CLI::App* report = app.add_subcommand("report", "aggregate metrics from train runs");
  report->add_option("dirs", report_dirs, "train run directories");
  report->add_option("--out", report_out, "output directory")->default_val("runs/report");

  try {
    app.parse(argc, argv);

    if (gen->parsed()) {
      wks::cli::cmd_gen(effective_config(gen_args), gen_args.out, gen_args.case_id);
    } else if (train->parsed()) {
      wks::cli::cmd_train(effective_config(train_args), train_args.out);
    } else if (eval->parsed()) {
      wks::cli::cmd_eval(eval_dir);
    } else if (tune->parsed()) {
      wks::cli::cmd_tune(effective_config(tune_args), tune_args.out);
    } else if (ablate->parsed()) {
      wks::cli::cmd_ablate(effective_config(ablate_args), ablate_args.out);
    } else if (sweep->parsed()) {
      wks::cli::cmd_sweep_seqlen(effective_config(sweep_args), sweep_args.out);
    } else if (report->parsed()) {
      std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
      wks::cli::cmd_report(dirs, report_out);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << "wakesense: usage error: " << single_line(e.what()) << "\n";
    return 2;
  } catch (const wks::ConfigError& e) {
    std::cerr << "wakesense: config error: " << single_line(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "wakesense: runtime error: " << single_line(e.what()) << "\n";
    return 3;
  }
}
