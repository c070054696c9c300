#include "wks/wake_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "wks/hash.hpp"

namespace wks::sim {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double envelope(double x_rel_mm, double x_off_mm, double sigma_x_mm) {
  const double d = x_rel_mm - x_off_mm;
  return std::exp(-(d * d) / (2.0 * sigma_x_mm * sigma_x_mm));
}

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

double SensorGeometry::x_offset_mm(std::size_t sensor) const {
  return radius_mm * std::sin(angles_deg[sensor] * kDegToRad);
}

void SensorGeometry::validate() const {
  if (radius_mm <= 0.0) throw std::invalid_argument("geometry: radius must be > 0");
  if (angles_deg.empty()) throw std::invalid_argument("geometry: no sensors");
  for (std::size_t i = 1; i < angles_deg.size(); ++i)
    if (!(angles_deg[i] > angles_deg[i - 1]))
      throw std::invalid_argument("geometry: angles must be strictly increasing");
}

void NoiseParams::validate() const {
  if (pulsation_amp_pa < 0.0 || blade_rate_hz < 0.0 || gaussian_sigma_pa < 0.0)
    throw std::invalid_argument("noise: amplitudes must be >= 0");
}

char direction_char(Direction d) { return d == Direction::P ? 'P' : 'N'; }

Direction direction_from_char(char c) {
  if (c == 'P') return Direction::P;
  if (c == 'N') return Direction::N;
  throw std::invalid_argument("direction must be P or N");
}

void Scenario::validate() const {
  if (!(y_mm > 0.0)) throw std::invalid_argument("scenario: y must be > 0");
  if (!(speed_mms > 0.0)) throw std::invalid_argument("scenario: speed must be > 0");
  if (!(dt_s > 0.0)) throw std::invalid_argument("scenario: dt must be > 0");
  if (x_start_mm == x_end_mm)
    throw std::invalid_argument("scenario: x_start equals x_end");
  const bool forward = x_end_mm > x_start_mm;
  if (forward != (dir == Direction::P))
    throw std::invalid_argument("scenario: sweep sign inconsistent with direction");
  noise.validate();
}

std::size_t Scenario::sweep_samples() const {
  const double span = std::abs(x_end_mm - x_start_mm);
  return static_cast<std::size_t>(std::floor(span / (speed_mms * dt_s))) + 1;
}

double pressure_at(double x_rel_mm, double y_mm, double sensor_angle_deg,
                   double radius_mm, double t_s, const WakeParams& wake,
                   const NoiseParams& noise, Rng& rng) {
  if (!std::isfinite(x_rel_mm) || !std::isfinite(y_mm) || !std::isfinite(t_s) ||
      !std::isfinite(sensor_angle_deg) || !(y_mm > 0.0))
    throw std::invalid_argument("pressure_at: non-finite or invalid input");

  const double x_off = radius_mm * std::sin(sensor_angle_deg * kDegToRad);
  const double decay = (wake.y_ref_mm / y_mm) * (wake.y_ref_mm / y_mm);
  const double env = envelope(x_rel_mm, x_off, wake.sigma_x_mm) * decay;

  const double mean = wake.peak_amp_pa * env;
  const double pulsation =
      noise.pulsation_amp_pa * env *
      std::sin(2.0 * std::numbers::pi * noise.blade_rate_hz * t_s);
  const double white = rng.gaussian(0.0, noise.gaussian_sigma_pa);
  return mean + pulsation + white;
}

PressureTrace simulate_trial(const Scenario& scenario,
                             const SensorGeometry& geometry,
                             const WakeParams& wake) {
  scenario.validate();
  geometry.validate();
  if (!scenario.noise.bias_per_sensor_pa.empty() &&
      scenario.noise.bias_per_sensor_pa.size() != geometry.count())
    throw std::invalid_argument("scenario: bias list does not match sensor count");

  const std::size_t n_sensors = geometry.count();
  const std::size_t n_sweep = scenario.sweep_samples();
  const std::size_t n_total = scenario.premotion_samples + n_sweep;
  const double sign = scenario.dir == Direction::P ? 1.0 : -1.0;

  PressureTrace trace;
  trace.premotion_samples = scenario.premotion_samples;
  trace.times_s.reserve(n_total);
  trace.frames_pa.reserve(n_total);
  trace.truth.reserve(n_total);

  Rng rng(scenario.seed);
  const auto bias = [&](std::size_t i) {
    return scenario.noise.bias_per_sensor_pa.empty()
               ? 0.0
               : scenario.noise.bias_per_sensor_pa[i];
  };

  // Stationary segment: propeller not yet rotating, so only bias + sensor noise.
  for (std::size_t k = 0; k < scenario.premotion_samples; ++k) {
    trace.times_s.push_back(static_cast<double>(k) * scenario.dt_s);
    std::vector<double> frame(n_sensors);
    for (std::size_t i = 0; i < n_sensors; ++i)
      frame[i] = bias(i) + rng.gaussian(0.0, scenario.noise.gaussian_sigma_pa);
    trace.frames_pa.push_back(std::move(frame));
    trace.truth.push_back({scenario.x_start_mm, scenario.speed_mms, scenario.dir});
  }

  for (std::size_t j = 0; j < n_sweep; ++j) {
    const double tau = static_cast<double>(j) * scenario.dt_s;
    const double x = scenario.x_start_mm + sign * scenario.speed_mms * tau;
    trace.times_s.push_back(
        static_cast<double>(scenario.premotion_samples + j) * scenario.dt_s);
    std::vector<double> frame(n_sensors);
    for (std::size_t i = 0; i < n_sensors; ++i)
      frame[i] = bias(i) + pressure_at(x, scenario.y_mm, geometry.angles_deg[i],
                                       geometry.radius_mm, tau, wake,
                                       scenario.noise, rng);
    trace.frames_pa.push_back(std::move(frame));
    trace.truth.push_back({x, scenario.speed_mms, scenario.dir});
  }
  return trace;
}

void validate_for_windowing(const Scenario& scenario, std::size_t sl) {
  if (scenario.sweep_samples() < 2 * sl)
    throw std::invalid_argument(
        "scenario: dt too large, sweep has fewer than 2*sl samples");
}

std::vector<Scenario> scenario_grid(const std::vector<double>& y_mm,
                                    const std::vector<double>& speeds_mms,
                                    const std::vector<Direction>& dirs,
                                    const Scenario& base) {
  std::vector<Scenario> grid;
  for (double y : y_mm)
    for (double v : speeds_mms)
      for (Direction d : dirs) {
        Scenario s = base;
        s.y_mm = y;
        s.speed_mms = v;
        s.dir = d;
        const double lo = std::min(base.x_start_mm, base.x_end_mm);
        const double hi = std::max(base.x_start_mm, base.x_end_mm);
        s.x_start_mm = d == Direction::P ? lo : hi;
        s.x_end_mm = d == Direction::P ? hi : lo;
        grid.push_back(s);
      }
  return grid;
}

std::vector<PressureTrace> generate_corpus(const std::vector<Scenario>& scenarios,
                                           const SensorGeometry& geometry,
                                           const WakeParams& wake,
                                           std::size_t repeats,
                                           std::uint64_t corpus_seed) {
  if (scenarios.empty())
    throw std::invalid_argument("generate_corpus: empty scenario list");
  if (repeats < 1) throw std::invalid_argument("generate_corpus: repeats must be >= 1");

  std::vector<PressureTrace> corpus;
  corpus.reserve(scenarios.size() * repeats);
  for (const Scenario& s : scenarios)
    for (std::size_t r = 0; r < repeats; ++r) {
      // Seeds derive from scenario content, not list position, so a
      // filtered grid regenerates the identical traces.
      std::uint64_t h = fnv1a64_mix(corpus_seed, s.y_mm);
      h = fnv1a64_mix(h, s.speed_mms);
      h = fnv1a64_mix(h, static_cast<std::uint64_t>(s.dir));
      h = fnv1a64_mix(h, s.x_start_mm);
      h = fnv1a64_mix(h, s.x_end_mm);
      h = fnv1a64_mix(h, s.dt_s);
      h = fnv1a64_mix(h, static_cast<std::uint64_t>(s.premotion_samples));
      h = fnv1a64_mix(h, static_cast<std::uint64_t>(r));
      Scenario trial = s;
      trial.seed = Rng(h).next_u64();
      corpus.push_back(simulate_trial(trial, geometry, wake));
    }
  return corpus;
}

std::string trace_to_csv(const PressureTrace& trace) {
  std::string out = "t";
  for (std::size_t i = 0; i < trace.sensors(); ++i)
    out += ",p" + std::to_string(i);
  out += ",x,v,d\n";
  for (std::size_t k = 0; k < trace.size(); ++k) {
    append_double(out, trace.times_s[k]);
    for (double p : trace.frames_pa[k]) {
      out += ',';
      append_double(out, p);
    }
    out += ',';
    append_double(out, trace.truth[k].x);
    out += ',';
    append_double(out, trace.truth[k].speed_mms);
    out += ',';
    out += direction_char(trace.truth[k].dir);
    out += '\n';
  }
  return out;
}

PressureTrace trace_from_csv(const std::string& csv) {
  PressureTrace trace;
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("trace csv: empty");
  const std::size_t n_cols = std::count(line.begin(), line.end(), ',') + 1;
  if (n_cols < 5) throw std::invalid_argument("trace csv: bad header");
  const std::size_t n_sensors = n_cols - 4;

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> nums;
    char dir_char = 0;
    std::size_t col = 0;
    while (std::getline(row, cell, ',')) {
      if (col == n_cols - 1)
        dir_char = cell.at(0);
      else
        nums.push_back(std::stod(cell));
      ++col;
    }
    if (nums.size() != n_cols - 1 || dir_char == 0)
      throw std::invalid_argument("trace csv: malformed row");
    trace.times_s.push_back(nums[0]);
    trace.frames_pa.emplace_back(nums.begin() + 1, nums.begin() + 1 + n_sensors);
    trace.truth.push_back({nums[n_sensors + 1], nums[n_sensors + 2],
                           direction_from_char(dir_char)});
  }

  // Premotion rows share x_start with the first sweep sample, so the leading
  // constant-x run is premotion + 1 rows.
  std::size_t run = 0;
  while (run + 1 < trace.size() &&
         trace.truth[run + 1].x == trace.truth[0].x)
    ++run;
  trace.premotion_samples = run;
  return trace;
}

void write_trace_csv(const std::filesystem::path& path, const PressureTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << trace_to_csv(trace);
}

PressureTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return trace_from_csv(ss.str());
}

}  // namespace wks::sim
