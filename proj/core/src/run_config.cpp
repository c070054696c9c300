#include "wks/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "wks/errors.hpp"
#include "wks/hash.hpp"

namespace wks::cli {
namespace {

using nlohmann::json;

/// Reads known keys out of one config object, tracking consumption so
/// typos fail fast instead of being silently ignored.
class Section {
 public:
  Section(const json& obj, std::string name) : obj_(&obj), name_(std::move(name)) {
    if (!obj_->is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  void get(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }

  void get(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "a boolean");
      out = v->get<bool>();
    }
  }

  void get(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      out = v->get<int>();
    }
  }

  void get(const char* key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) fail(key, "a non-negative integer");
      out = static_cast<std::size_t>(v->get<unsigned long long>());
    }
  }

  void get(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }

  void get(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) fail(key, "an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }

  void get(const char* key, std::vector<std::size_t>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of non-negative integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer() || e.get<long long>() < 0) {
          fail(key, "an array of non-negative integers");
        }
        out.push_back(static_cast<std::size_t>(e.get<unsigned long long>()));
      }
    }
  }

  void get(const char* key, std::array<double, 3>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 3) fail(key, "an array of 3 numbers");
      for (std::size_t i = 0; i < 3; ++i) {
        if (!(*v)[i].is_number()) fail(key, "an array of 3 numbers");
        out[i] = (*v)[i].get<double>();
      }
    }
  }

  const json* child(const char* key) { return find(key); }

  void finish() const {
    for (auto it = obj_->begin(); it != obj_->end(); ++it) {
      if (seen_.count(it.key()) == 0) {
        throw ConfigError("unknown config key '" + qualify(it.key()) + "'");
      }
    }
  }

 private:
  const json* find(const char* key) {
    seen_.insert(key);
    auto it = obj_->find(key);
    return it == obj_->end() ? nullptr : &*it;
  }

  std::string qualify(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

  [[noreturn]] void fail(const char* key, const std::string& expected) const {
    throw ConfigError("config key '" + qualify(key) + "' must be " + expected);
  }

  const json* obj_;
  std::string name_;
  std::set<std::string> seen_;
};

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["case"] = c.case_id;

  json& s = j["sim"];
  s["dt_s"] = c.sim.dt_s;
  s["x_start_mm"] = c.sim.x_start_mm;
  s["x_end_mm"] = c.sim.x_end_mm;
  s["premotion_samples"] = c.sim.premotion_samples;
  s["speeds_mms"] = c.sim.speeds_mms;
  s["y_case1_mm"] = c.sim.y_case1_mm;
  s["y_case2_mm"] = c.sim.y_case2_mm;
  s["repeats"] = c.sim.repeats;
  s["radius_mm"] = c.sim.geometry.radius_mm;
  s["angles_deg"] = c.sim.geometry.angles_deg;
  s["peak_amp_pa"] = c.sim.wake.peak_amp_pa;
  s["sigma_x_mm"] = c.sim.wake.sigma_x_mm;
  s["y_ref_mm"] = c.sim.wake.y_ref_mm;
  s["pulsation_amp_pa"] = c.sim.noise.pulsation_amp_pa;
  s["blade_rate_hz"] = c.sim.noise.blade_rate_hz;
  s["gaussian_sigma_pa"] = c.sim.noise.gaussian_sigma_pa;
  s["bias_per_sensor_pa"] = c.sim.noise.bias_per_sensor_pa;

  json& d = j["data"];
  d["sl"] = c.data.sl;
  d["stride"] = c.data.stride;
  d["clip_mm"] = c.data.clip_mm;
  d["baseline_len"] = c.data.baseline_len;
  d["split_ratio"] = c.data.split_ratio;
  d["corpus_dir"] = c.data.corpus_dir;

  json& m = j["model"];
  m["conv1_filters"] = c.model.conv1_filters;
  m["conv1_kernel"] = c.model.conv1_kernel;
  m["conv2_filters"] = c.model.conv2_filters;
  m["conv2_kernel"] = c.model.conv2_kernel;
  m["pool"] = c.model.pool;
  m["lstm_hidden"] = c.model.lstm_hidden;
  m["shared_width"] = c.model.shared_width;
  m["dropout"] = c.model.dropout;
  m["cnn_only"] = c.model.cnn_only;

  json& t = j["train"];
  t["epochs"] = c.train.epochs;
  t["batch_size"] = c.train.batch_size;
  t["lr"] = c.train.lr;
  t["lambda"] = c.train.lambda;

  json& u = j["tune"];
  u["population"] = c.tune.population;
  u["iterations"] = c.tune.iterations;
  u["spiral_b"] = c.tune.spiral_b;
  u["lambda_min"] = c.tune.lambda_min;
  u["lambda_max"] = c.tune.lambda_max;
  u["proxy_epochs"] = c.tune.proxy_epochs;
  u["baselines"] = c.tune.baselines;

  j["ablate"]["seeds"] = c.ablate.seeds;
  j["sweep"]["sls"] = c.sweep.sls;
  j["sweep"]["seeds"] = c.sweep.seeds;
  return j;
}

void from_json(const json& j, RunConfig& c) {
  Section top(j, "");
  top.get("seed", c.seed);
  top.get("case", c.case_id);

  if (const json* obj = top.child("sim")) {
    Section s(*obj, "sim");
    s.get("dt_s", c.sim.dt_s);
    s.get("x_start_mm", c.sim.x_start_mm);
    s.get("x_end_mm", c.sim.x_end_mm);
    s.get("premotion_samples", c.sim.premotion_samples);
    s.get("speeds_mms", c.sim.speeds_mms);
    s.get("y_case1_mm", c.sim.y_case1_mm);
    s.get("y_case2_mm", c.sim.y_case2_mm);
    s.get("repeats", c.sim.repeats);
    s.get("radius_mm", c.sim.geometry.radius_mm);
    s.get("angles_deg", c.sim.geometry.angles_deg);
    s.get("peak_amp_pa", c.sim.wake.peak_amp_pa);
    s.get("sigma_x_mm", c.sim.wake.sigma_x_mm);
    s.get("y_ref_mm", c.sim.wake.y_ref_mm);
    s.get("pulsation_amp_pa", c.sim.noise.pulsation_amp_pa);
    s.get("blade_rate_hz", c.sim.noise.blade_rate_hz);
    s.get("gaussian_sigma_pa", c.sim.noise.gaussian_sigma_pa);
    s.get("bias_per_sensor_pa", c.sim.noise.bias_per_sensor_pa);
    s.finish();
  }

  if (const json* obj = top.child("data")) {
    Section d(*obj, "data");
    d.get("sl", c.data.sl);
    d.get("stride", c.data.stride);
    d.get("clip_mm", c.data.clip_mm);
    d.get("baseline_len", c.data.baseline_len);
    d.get("split_ratio", c.data.split_ratio);
    d.get("corpus_dir", c.data.corpus_dir);
    d.finish();
  }

  if (const json* obj = top.child("model")) {
    Section m(*obj, "model");
    m.get("conv1_filters", c.model.conv1_filters);
    m.get("conv1_kernel", c.model.conv1_kernel);
    m.get("conv2_filters", c.model.conv2_filters);
    m.get("conv2_kernel", c.model.conv2_kernel);
    m.get("pool", c.model.pool);
    m.get("lstm_hidden", c.model.lstm_hidden);
    m.get("shared_width", c.model.shared_width);
    m.get("dropout", c.model.dropout);
    m.get("cnn_only", c.model.cnn_only);
    m.finish();
  }

  if (const json* obj = top.child("train")) {
    Section t(*obj, "train");
    t.get("epochs", c.train.epochs);
    t.get("batch_size", c.train.batch_size);
    t.get("lr", c.train.lr);
    t.get("lambda", c.train.lambda);
    t.finish();
  }

  if (const json* obj = top.child("tune")) {
    Section u(*obj, "tune");
    u.get("population", c.tune.population);
    u.get("iterations", c.tune.iterations);
    u.get("spiral_b", c.tune.spiral_b);
    u.get("lambda_min", c.tune.lambda_min);
    u.get("lambda_max", c.tune.lambda_max);
    u.get("proxy_epochs", c.tune.proxy_epochs);
    u.get("baselines", c.tune.baselines);
    u.finish();
  }

  if (const json* obj = top.child("ablate")) {
    Section a(*obj, "ablate");
    a.get("seeds", c.ablate.seeds);
    a.finish();
  }

  if (const json* obj = top.child("sweep")) {
    Section w(*obj, "sweep");
    w.get("sls", c.sweep.sls);
    w.get("seeds", c.sweep.seeds);
    w.finish();
  }
  top.finish();
}

}  // namespace

void RunConfig::validate() const {
  if (case_id != 1 && case_id != 2) throw ConfigError("case must be 1 or 2");
  if (!(sim.dt_s > 0.0)) throw ConfigError("sim.dt_s must be positive");
  if (sim.x_start_mm == sim.x_end_mm) throw ConfigError("sim sweep range is empty");
  if (sim.speeds_mms.empty()) throw ConfigError("sim.speeds_mms must not be empty");
  for (double v : sim.speeds_mms) {
    if (!(v > 0.0)) throw ConfigError("sim.speeds_mms entries must be positive");
  }
  if (sim.repeats == 0) throw ConfigError("sim.repeats must be at least 1");
  if (!(sim.y_case1_mm > 0.0) || !(sim.y_case2_mm > 0.0)) {
    throw ConfigError("sim case offsets must be positive");
  }
  if (!(sim.wake.sigma_x_mm > 0.0)) throw ConfigError("sim.sigma_x_mm must be positive");
  if (!(sim.wake.y_ref_mm > 0.0)) throw ConfigError("sim.y_ref_mm must be positive");
  if (sim.wake.peak_amp_pa < 0.0) throw ConfigError("sim.peak_amp_pa must not be negative");
  if (sim.noise.pulsation_amp_pa < 0.0 || sim.noise.gaussian_sigma_pa < 0.0) {
    throw ConfigError("sim noise amplitudes must not be negative");
  }
  if (!sim.noise.bias_per_sensor_pa.empty() &&
      sim.noise.bias_per_sensor_pa.size() != sim.geometry.count()) {
    throw ConfigError("sim.bias_per_sensor_pa must match the sensor count");
  }
  sim.geometry.validate();

  if (data.sl == 0) throw ConfigError("data.sl must be positive");
  if (data.stride == 0) throw ConfigError("data.stride must be positive");
  if (!(data.clip_mm > 0.0)) throw ConfigError("data.clip_mm must be positive");
  if (data.baseline_len == 0) throw ConfigError("data.baseline_len must be positive");
  if (data.baseline_len > sim.premotion_samples) {
    throw ConfigError("data.baseline_len cannot exceed sim.premotion_samples");
  }
  if (!(data.split_ratio > 0.0 && data.split_ratio < 1.0)) {
    throw ConfigError("data.split_ratio must lie strictly between 0 and 1");
  }

  if (train.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(train.lr > 0.0)) throw ConfigError("train.lr must be positive");
  for (double l : train.lambda) {
    if (!(l > 0.0)) throw ConfigError("train.lambda entries must be positive");
  }

  if (tune.population == 0) throw ConfigError("tune.population must be positive");
  if (tune.iterations == 0) throw ConfigError("tune.iterations must be positive");
  if (!(tune.lambda_min > 0.0) || !(tune.lambda_min < tune.lambda_max)) {
    throw ConfigError("tune lambda bounds must satisfy 0 < lambda_min < lambda_max");
  }
  if (tune.baselines == 0) throw ConfigError("tune.baselines must be positive");

  if (ablate.seeds.empty()) throw ConfigError("ablate.seeds must not be empty");
  if (sweep.sls.empty()) throw ConfigError("sweep.sls must not be empty");

  resolved_model().validate();
}

sim::Scenario RunConfig::base_scenario() const {
  sim::Scenario s;
  s.y_mm = case_y_mm();
  s.x_start_mm = sim.x_start_mm;
  s.x_end_mm = sim.x_end_mm;
  s.dt_s = sim.dt_s;
  s.premotion_samples = sim.premotion_samples;
  s.noise = sim.noise;
  return s;
}

est::ModelConfig RunConfig::resolved_model() const {
  est::ModelConfig mc;
  mc.sl = data.sl;
  mc.sensors = sim.geometry.count();
  mc.conv1_filters = model.conv1_filters;
  mc.conv1_kernel = model.conv1_kernel;
  mc.conv2_filters = model.conv2_filters;
  mc.conv2_kernel = model.conv2_kernel;
  mc.pool = model.pool;
  mc.lstm_hidden = model.lstm_hidden;
  mc.shared_width = model.shared_width;
  mc.dropout = model.dropout;
  mc.cnn_only = model.cnn_only;
  std::set<double> speeds(sim.speeds_mms.begin(), sim.speeds_mms.end());
  mc.speed_classes = speeds.size();
  mc.direction_classes = 2;
  return mc;
}

void apply_overrides(RunConfig& config, const CliOverrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.sl) config.data.sl = *overrides.sl;
  if (overrides.case_id) config.case_id = *overrides.case_id;
}

RunConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  RunConfig config;
  from_json(j, config);
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json_text(buffer.str());
}

std::string config_to_json_text(const RunConfig& config) {
  return to_json(config).dump(2) + "\n";
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << config_to_json_text(config);
  if (!out) throw std::runtime_error("failed while writing " + path.string());
}

namespace {

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace

std::string config_hash(const RunConfig& config) {
  return hex16(fnv1a64(to_json(config).dump()));
}

std::string sim_hash(const RunConfig& config) {
  const std::uint64_t h = fnv1a64(to_json(config)["sim"].dump());
  return hex16(fnv1a64_mix(h, config.seed));
}

}  // namespace wks::cli
