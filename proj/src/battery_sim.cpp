#include "dmdgraph/battery_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dmdgraph/csv.hpp"
#include "dmdgraph/error.hpp"

namespace dmdgraph::sim {

namespace {

[[noreturn]] void domain_error(const std::string& what) {
  throw Error(ErrorKind::Domain, what);
}

// Number of whole sample periods in a duration; durations must be integer
// multiples of the period.
long long period_count(double duration, double period, const char* name) {
  const double ratio = duration / period;
  const double rounded = std::round(ratio);
  if (rounded < 0.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    domain_error(std::string(name) + " must be a nonnegative integer multiple of sample_period");
  }
  return static_cast<long long>(rounded);
}

struct Segment {
  double current;
  long long steps;
  bool is_pulse;
};

}  // namespace

std::vector<OcvPoint> default_ocv_table() {
  return {{0.0, 2.5},  {0.1, 3.2},  {0.2, 3.43}, {0.3, 3.55},
          {0.4, 3.62}, {0.5, 3.67}, {0.6, 3.74}, {0.7, 3.83},
          {0.8, 3.93}, {0.9, 4.05}, {1.0, 4.2}};
}

EcmParameters EcmParameters::defaults() {
  EcmParameters p;
  p.ocv_table = default_ocv_table();
  return p;
}

void EcmParameters::validate() const {
  if (!(r0 >= 0.0 && r1 >= 0.0 && r2 >= 0.0)) domain_error("resistances must be >= 0");
  if (!(c1 > 0.0 && c2 > 0.0)) domain_error("capacitances must be > 0");
  if (!(capacity_ah > 0.0)) domain_error("capacity must be > 0");
  if (ocv_table.size() < 2) domain_error("ocv_table needs at least two breakpoints");
  for (std::size_t i = 1; i < ocv_table.size(); ++i) {
    if (!(ocv_table[i].soc > ocv_table[i - 1].soc))
      domain_error("ocv_table soc values must be strictly increasing");
    if (ocv_table[i].voltage < ocv_table[i - 1].voltage)
      domain_error("ocv_table voltages must be nondecreasing");
  }
  if (ocv_table.front().soc != 0.0 || ocv_table.back().soc != 1.0)
    domain_error("ocv_table must span soc 0 to 1");
  if (ocv_table.front().voltage != kMinVoltage || ocv_table.back().voltage != kMaxVoltage)
    domain_error("ocv_table must be anchored at 2.5 V and 4.2 V");
}

std::vector<OcvPoint> load_ocv_table(const std::filesystem::path& path) {
  const auto table = io::read_numeric_csv(path, {"soc", "voltage_v"});
  std::vector<OcvPoint> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) out.push_back({row[0], row[1]});
  return out;
}

void HppcProfile::validate() const {
  if (!(sample_period > 0.0)) domain_error("sample_period must be > 0");
  period_count(pulse_duration, sample_period, "pulse_duration");
  period_count(rest_duration, sample_period, "rest_duration");
  if (!(initial_soc >= 0.0 && initial_soc <= 1.0)) domain_error("initial_soc must lie in [0, 1]");
  if (soc_steps.empty()) domain_error("soc_steps must not be empty");
  for (double s : soc_steps)
    if (!(s >= 0.0 && s <= 1.0)) domain_error("soc_steps must lie in [0, 1]");
  const bool ascending = std::is_sorted(soc_steps.begin(), soc_steps.end());
  const bool descending = std::is_sorted(soc_steps.rbegin(), soc_steps.rend());
  if (!ascending && !descending) domain_error("soc_steps must be ordered");
  if (soc_steps.size() > 1 && !(transition_current > 0.0))
    domain_error("transition_current must be > 0 when more than one soc step is given");
}

Eigen::VectorXd TimeSeries::voltages() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t k = 0; k < samples.size(); ++k) v(static_cast<Eigen::Index>(k)) = samples[k].voltage_v;
  return v;
}

Eigen::VectorXd TimeSeries::currents() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t k = 0; k < samples.size(); ++k) v(static_cast<Eigen::Index>(k)) = samples[k].current_a;
  return v;
}

Eigen::VectorXd TimeSeries::times() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t k = 0; k < samples.size(); ++k) v(static_cast<Eigen::Index>(k)) = samples[k].time_s;
  return v;
}

double ocv_lookup(const EcmParameters& params, double soc) {
  if (!(soc >= 0.0 && soc <= 1.0)) domain_error("soc " + std::to_string(soc) + " outside [0, 1]");
  const auto& table = params.ocv_table;
  if (table.empty()) domain_error("empty ocv_table");
  if (soc <= table.front().soc) return table.front().voltage;
  if (soc >= table.back().soc) return table.back().voltage;
  const auto hi = std::upper_bound(table.begin(), table.end(), soc,
                                   [](double s, const OcvPoint& p) { return s < p.soc; });
  const auto lo = hi - 1;
  if (soc == lo->soc) return lo->voltage;
  const double w = (soc - lo->soc) / (hi->soc - lo->soc);
  return lo->voltage + w * (hi->voltage - lo->voltage);
}

namespace {

double relax_branch(double v, double r, double c, double current, double dt) {
  if (r == 0.0) return 0.0;
  const double decay = std::exp(-dt / (r * c));
  return v * decay + r * (1.0 - decay) * current;
}

}  // namespace

EcmStep step_ecm(const EcmState& state, double current, double dt,
                 const EcmParameters& params) {
  if (!(dt > 0.0)) domain_error("dt must be > 0");
  EcmStep out{};
  out.state.soc = state.soc - current * dt / (3600.0 * params.capacity_ah);
  out.saturated = false;
  if (out.state.soc < 0.0 || out.state.soc > 1.0) {
    out.state.soc = std::clamp(out.state.soc, 0.0, 1.0);
    out.saturated = true;
  }
  out.state.v_rc1 = relax_branch(state.v_rc1, params.r1, params.c1, current, dt);
  out.state.v_rc2 = relax_branch(state.v_rc2, params.r2, params.c2, current, dt);
  out.terminal_voltage = ocv_lookup(params, out.state.soc) - current * params.r0 -
                         out.state.v_rc1 - out.state.v_rc2;
  return out;
}

EcmParameters degrade_params(const EcmParameters& params0, int cycle,
                             const DegradationSchedule& schedule) {
  if (cycle < 0) domain_error("cycle must be >= 0");
  if (cycle == 0) return params0;
  const double n = static_cast<double>(cycle);
  EcmParameters p = params0;
  p.r0 = params0.r0 * std::pow(1.0 + schedule.r0_growth_per_cycle, n);
  p.capacity_ah = params0.capacity_ah * std::pow(1.0 - schedule.capacity_fade_per_cycle, n);
  const double rc_scale = std::pow(1.0 + schedule.rc_drift_per_cycle, n);
  p.r1 = params0.r1 * rc_scale;
  p.r2 = params0.r2 * rc_scale;
  if (!(p.capacity_ah > 0.0)) domain_error("degradation schedule drives capacity to zero");
  return p;
}

TimeSeries generate_hppc(const EcmParameters& params, const HppcProfile& profile,
                         int cycle) {
  params.validate();
  profile.validate();
  if (cycle < 0) domain_error("cycle must be >= 0");

  const double dt = profile.sample_period;
  const long long pulse_steps = period_count(profile.pulse_duration, dt, "pulse_duration");
  const long long rest_steps = period_count(profile.rest_duration, dt, "rest_duration");
  const double amp_seconds_per_soc = 3600.0 * params.capacity_ah;

  std::vector<Segment> segments;
  double planned_soc = profile.initial_soc;
  for (double target : profile.soc_steps) {
    const double delta = planned_soc - target;
    if (std::abs(delta) > 1e-12) {
      const double current = delta > 0.0 ? profile.transition_current : -profile.transition_current;
      const auto steps = static_cast<long long>(
          std::llround(std::abs(delta) * amp_seconds_per_soc / (profile.transition_current * dt)));
      segments.push_back({current, steps, false});
      planned_soc = target;
    }
    segments.push_back({profile.pulse_current, pulse_steps, true});
    segments.push_back({0.0, rest_steps, false});
    segments.push_back({-profile.pulse_current, pulse_steps, true});
    segments.push_back({0.0, rest_steps, false});
  }

  TimeSeries series;
  series.cycle = cycle;
  series.sample_period = dt;
  EcmState state{profile.initial_soc, 0.0, 0.0};
  series.samples.push_back({0.0, 0.0, ocv_lookup(params, state.soc)});

  for (const auto& seg : segments) {
    for (long long k = 0; k < seg.steps; ++k) {
      const EcmStep next = step_ecm(state, seg.current, dt, params);
      if (next.terminal_voltage < kMinVoltage || next.terminal_voltage > kMaxVoltage) {
        series.truncated = true;
        break;
      }
      series.soc_saturated = series.soc_saturated || next.saturated;
      series.samples.back().current_a = seg.current;
      const auto index = static_cast<double>(series.samples.size());
      series.samples.push_back({index * dt, 0.0, next.terminal_voltage});
      state = next.state;
    }
  }
  return series;
}

void add_voltage_noise(TimeSeries& series, double stddev, std::uint64_t seed) {
  if (stddev < 0.0) domain_error("noise stddev must be >= 0");
  if (stddev == 0.0) return;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(series.cycle)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, stddev);
  for (auto& s : series.samples) s.voltage_v += noise(rng);
}

}  // namespace dmdgraph::sim
