#include <filesystem>
#include <string>

#include "doctest.h"
#include "wks/errors.hpp"
#include "wks/run_config.hpp"

using namespace wks::cli;
namespace fs = std::filesystem;

namespace {

bool error_mentions(const std::string& json, const std::string& needle) {
  try {
    config_from_json_text(json);
  } catch (const wks::ConfigError& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_SUITE("run_config") {

TEST_CASE("defaults validate and pick the case offset") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.case_y_mm() == 250.0);
  c.case_id = 2;
  CHECK(c.case_y_mm() == 300.0);
}

TEST_CASE("resolved_model mirrors the data and sim sections") {
  RunConfig c;
  c.data.sl = 48;
  c.model.conv1_filters = 16;
  c.model.cnn_only = true;
  c.sim.speeds_mms = {400.0, 600.0, 800.0};
  wks::est::ModelConfig m = c.resolved_model();
  CHECK(m.sl == 48);
  CHECK(m.sensors == 3);
  CHECK(m.speed_classes == 3);
  CHECK(m.conv1_filters == 16);
  CHECK(m.cnn_only);
  CHECK(m.dropout == c.model.dropout);
}

TEST_CASE("json values land in the right fields") {
  RunConfig c = config_from_json_text(R"({
    "seed": 7,
    "case": 2,
    "sim": {"dt_s": 0.005, "repeats": 4, "speeds_mms": [400, 800],
            "blade_rate_hz": 30.0, "angles_deg": [-30, 0, 30]},
    "data": {"sl": 32, "stride": 2, "corpus_dir": "runs/gen"},
    "model": {"cnn_only": true, "dropout": 0.1},
    "train": {"epochs": 5, "lambda": [0.5, 2.0, 1.5]},
    "tune": {"proxy_epochs": 8},
    "sweep": {"sls": [32, 64], "seeds": [1, 2]}
  })");
  CHECK(c.seed == 7);
  CHECK(c.case_id == 2);
  CHECK(c.sim.dt_s == 0.005);
  CHECK(c.sim.repeats == 4);
  CHECK(c.sim.speeds_mms == std::vector<double>{400.0, 800.0});
  CHECK(c.sim.noise.blade_rate_hz == 30.0);
  CHECK(c.sim.geometry.angles_deg == std::vector<double>{-30.0, 0.0, 30.0});
  CHECK(c.data.sl == 32);
  CHECK(c.data.corpus_dir == "runs/gen");
  CHECK(c.model.cnn_only);
  CHECK(c.train.epochs == 5);
  CHECK(c.train.lambda == std::array<double, 3>{0.5, 2.0, 1.5});
  CHECK(c.tune.proxy_epochs == 8);
  CHECK(c.sweep.seeds == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("unknown keys are rejected with their path") {
  CHECK(error_mentions(R"({"sead": 1})", "sead"));
  CHECK(error_mentions(R"({"sim": {"dt": 0.01}})", "sim.dt"));
  CHECK(error_mentions(R"({"model": {"conv3_filters": 8}})", "model.conv3_filters"));
}

TEST_CASE("type and range violations are config errors") {
  CHECK_THROWS_AS(config_from_json_text(R"({"train": {"epochs": "many"}})"), wks::ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"train": {"epochs": -3}})"), wks::ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"train": {"lambda": [1.0, 2.0]}})"), wks::ConfigError);
  // range checks live in validate(), which every command runs after overrides
  CHECK_THROWS_AS(config_from_json_text(R"({"case": 3})").validate(), wks::ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"data": {"split_ratio": 1.5}})").validate(),
                  wks::ConfigError);
  CHECK_THROWS_AS(config_from_json_text("{nope"), wks::ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"(["a", "b"])"), wks::ConfigError);
}

TEST_CASE("cli overrides replace single fields") {
  RunConfig c;
  CliOverrides o;
  o.seed = 99;
  o.sl = 80;
  o.case_id = 2;
  apply_overrides(c, o);
  CHECK(c.seed == 99);
  CHECK(c.data.sl == 80);
  CHECK(c.case_id == 2);

  RunConfig untouched;
  apply_overrides(untouched, CliOverrides{});
  CHECK(untouched.seed == 0);
  CHECK(untouched.data.sl == 64);
}

TEST_CASE("config hash ignores key order but tracks values") {
  RunConfig a = config_from_json_text(R"({"seed": 3, "data": {"sl": 32, "stride": 2}})");
  RunConfig b = config_from_json_text(R"({"data": {"stride": 2, "sl": 32}, "seed": 3})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);

  RunConfig c = a;
  c.seed = 4;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("sim hash only tracks the corpus-determining fields") {
  RunConfig base;
  RunConfig train_tweaked = base;
  train_tweaked.train.epochs = 17;
  train_tweaked.data.sl = 32;
  train_tweaked.case_id = 2;
  CHECK(sim_hash(base) == sim_hash(train_tweaked));

  RunConfig seeded = base;
  seeded.seed = 5;
  CHECK(sim_hash(base) != sim_hash(seeded));

  RunConfig slower = base;
  slower.sim.dt_s = 0.005;
  CHECK(sim_hash(base) != sim_hash(slower));
}

TEST_CASE("save and load round-trip the canonical text") {
  RunConfig c;
  c.seed = 11;
  c.data.sl = 48;
  c.sim.repeats = 2;
  const fs::path path = "tmp_config_roundtrip.json";
  save_config(path, c);
  RunConfig back = load_config(path);
  CHECK(config_to_json_text(back) == config_to_json_text(c));
  CHECK(config_hash(back) == config_hash(c));
  fs::remove(path);

  CHECK_THROWS_AS(load_config("no_such_config.json"), wks::ConfigError);
}

}  // TEST_SUITE
