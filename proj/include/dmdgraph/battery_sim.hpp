#pragma once

// Synthetic HPPC telemetry from a two-branch Thevenin equivalent circuit.
//
// Sign convention: positive current discharges the cell.

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace dmdgraph::sim {

inline constexpr double kMinVoltage = 2.5;
inline constexpr double kMaxVoltage = 4.2;

struct OcvPoint {
  double soc;
  double voltage;
};

struct EcmParameters {
  double r0 = 1.0e-3;         // ohmic resistance [ohm]
  double r1 = 0.6e-3;         // fast polarization branch [ohm]
  double c1 = 2.0e4;          // [F]
  double r2 = 0.8e-3;         // slow polarization branch [ohm]
  double c2 = 1.0e5;          // [F]
  double capacity_ah = 30.0;  // [A h]
  std::vector<OcvPoint> ocv_table;

  /// Throws Error(Domain) when an invariant is violated.
  void validate() const;

  /// 30 Ah cell with the shipped 11-point OCV table.
  static EcmParameters defaults();
};

/// The shipped OCV table, identical to data/ocv_default.csv.
std::vector<OcvPoint> default_ocv_table();

/// Reads a `soc,voltage_v` CSV file.
std::vector<OcvPoint> load_ocv_table(const std::filesystem::path& path);

struct DegradationSchedule {
  double r0_growth_per_cycle = 0.001;
  double capacity_fade_per_cycle = 0.0008;
  double rc_drift_per_cycle = 0.002;

  static DegradationSchedule defaults() { return {}; }
};

struct HppcProfile {
  double pulse_current = 30.0;       // [A], 1C for the default cell
  double pulse_duration = 10.0;      // [s]
  double rest_duration = 40.0;       // [s]
  double transition_current = 30.0;  // [A] magnitude of the SOC-moving segments
  std::vector<double> soc_steps = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
  double sample_period = 1.0;  // [s]
  double initial_soc = 0.9;

  void validate() const;

  static HppcProfile defaults() { return {}; }
};

/// One sample. `current_a` is the current held over [time_s, time_s + dt);
/// `voltage_v` is the terminal voltage observed at time_s.
struct Sample {
  double time_s;
  double current_a;
  double voltage_v;
};

struct TimeSeries {
  int cycle = 0;
  double sample_period = 1.0;
  std::vector<Sample> samples;
  bool truncated = false;      // a segment was cut short at a voltage limit
  bool soc_saturated = false;  // state of charge was clamped to [0, 1]

  std::size_t size() const { return samples.size(); }
  Eigen::VectorXd voltages() const;
  Eigen::VectorXd currents() const;
  Eigen::VectorXd times() const;
};

struct EcmState {
  double soc = 1.0;
  double v_rc1 = 0.0;
  double v_rc2 = 0.0;
};

struct EcmStep {
  EcmState state;
  double terminal_voltage;
  bool saturated;
};

/// Piecewise-linear interpolation of the OCV table.
double ocv_lookup(const EcmParameters& params, double soc);

/// Advances the circuit by one zero-order-hold interval of length dt.
EcmStep step_ecm(const EcmState& state, double current, double dt,
                 const EcmParameters& params);

EcmParameters degrade_params(const EcmParameters& params0, int cycle,
                             const DegradationSchedule& schedule);

/// Runs the pulse protocol from rest at profile.initial_soc. For every SOC
/// step: a constant-current move to the step (if needed), then discharge
/// pulse, rest, charge pulse, rest.
TimeSeries generate_hppc(const EcmParameters& params, const HppcProfile& profile,
                         int cycle);

/// Adds zero-mean Gaussian noise to the voltage column. A zero stddev leaves
/// the series untouched.
void add_voltage_noise(TimeSeries& series, double stddev, std::uint64_t seed);

}  // namespace dmdgraph::sim
