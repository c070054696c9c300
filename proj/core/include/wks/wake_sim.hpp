#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wks/rng.hpp"

namespace wks::sim {

/// Angular layout of the pressure sensors on the cylindrical housing.
struct SensorGeometry {
  double radius_mm = 40.0;
  std::vector<double> angles_deg = {-45.0, 0.0, 45.0};

  std::size_t count() const { return angles_deg.size(); }
  /// Lateral offset of a sensor's envelope peak: radius * sin(angle).
  double x_offset_mm(std::size_t sensor) const;
  void validate() const;
};

/// Stochastic part of the surrogate signal. All amplitudes >= 0.
struct NoiseParams {
  double pulsation_amp_pa = 5.0;  // blade-rate sinusoid amplitude
  double blade_rate_hz = 25.0;
  double gaussian_sigma_pa = 1.0;  // sensor resolution is 1 Pa
  std::vector<double> bias_per_sensor_pa;

  void validate() const;
};

/// Deterministic part of the surrogate: Gaussian lateral envelope with
/// inverse-square longitudinal decay.
struct WakeParams {
  double peak_amp_pa = 30.0;   // A0
  double sigma_x_mm = 60.0;    // lateral envelope width
  double y_ref_mm = 250.0;     // y0, reference longitudinal offset
};

enum class Direction : std::uint8_t { P = 0, N = 1 };

char direction_char(Direction d);
Direction direction_from_char(char c);

/// One lateral sweep of the propeller past the array at constant speed.
struct Scenario {
  double y_mm = 250.0;
  double speed_mms = 400.0;
  Direction dir = Direction::P;
  double x_start_mm = -175.0;
  double x_end_mm = 175.0;
  double dt_s = 0.0025;
  std::size_t premotion_samples = 50;  // stationary segment for debiasing
  std::uint64_t seed = 0;
  NoiseParams noise;

  void validate() const;
  /// Number of samples while the propeller is inside [x_start, x_end].
  std::size_t sweep_samples() const;
};

/// Per-frame ground truth. `x` is in mm in raw traces; after
/// clip_and_normalize it is dimensionless in [-1, 1].
struct GroundTruth {
  double x = 0.0;
  double speed_mms = 0.0;
  Direction dir = Direction::P;
};

/// Simulated recording: times, one pressure frame per time, aligned truth.
struct PressureTrace {
  std::vector<double> times_s;
  std::vector<std::vector<double>> frames_pa;  // [sample][sensor]
  std::vector<GroundTruth> truth;
  std::size_t premotion_samples = 0;

  std::size_t size() const { return frames_pa.size(); }
  std::size_t sensors() const { return frames_pa.empty() ? 0 : frames_pa[0].size(); }
};

/// Surrogate pressure at one sensor. `x_rel_mm` is the propeller's lateral
/// position in array coordinates; the sensor's envelope peak sits at
/// radius * sin(angle). Deterministic given the rng state. Sensor bias is
/// added by simulate_trial, not here.
double pressure_at(double x_rel_mm, double y_mm, double sensor_angle_deg,
                   double radius_mm, double t_s, const WakeParams& wake,
                   const NoiseParams& noise, Rng& rng);

/// Runs one scenario: premotion stationary segment (bias + sensor noise
/// only), then the constant-speed sweep. Throws std::invalid_argument on
/// invalid scenario/geometry.
PressureTrace simulate_trial(const Scenario& scenario,
                             const SensorGeometry& geometry,
                             const WakeParams& wake = {});

/// Rejects scenarios whose sweep cannot cover 2*sl samples.
void validate_for_windowing(const Scenario& scenario, std::size_t sl);

/// Full factorial over offsets x speeds x directions.
std::vector<Scenario> scenario_grid(const std::vector<double>& y_mm,
                                    const std::vector<double>& speeds_mms,
                                    const std::vector<Direction>& dirs,
                                    const Scenario& base);

/// `repeats` traces per scenario, each with a seed derived from
/// `corpus_seed`; identical corpus_seed reproduces identical traces.
std::vector<PressureTrace> generate_corpus(const std::vector<Scenario>& scenarios,
                                           const SensorGeometry& geometry,
                                           const WakeParams& wake,
                                           std::size_t repeats,
                                           std::uint64_t corpus_seed);

/// CSV with header t,p0,...,p{N-1},x,v,d; 17 significant digits so that
/// write/read round-trips bit-exactly.
std::string trace_to_csv(const PressureTrace& trace);
PressureTrace trace_from_csv(const std::string& csv);
void write_trace_csv(const std::filesystem::path& path, const PressureTrace& trace);
PressureTrace read_trace_csv(const std::filesystem::path& path);

}  // namespace wks::sim
