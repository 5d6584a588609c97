#pragma once

// Campaign orchestration: per-stage telemetry -> embedding -> DMDc -> graph
// metrics, and the report/export files built from the results.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dmdgraph/battery_sim.hpp"
#include "dmdgraph/dmdc.hpp"
#include "dmdgraph/embedding.hpp"
#include "dmdgraph/graph_metrics.hpp"

namespace dmdgraph::pipeline {

inline constexpr std::string_view kSimulateSource = "simulate";
inline constexpr std::string_view kMetricsHeader =
    "cycle,mu,edges,connectivity,q_proxy,n_rows,n_cols,one_step_rmse";

std::string_view tool_version();

struct StageSpec {
  int cycle = 0;
  std::string source{kSimulateSource};  // "simulate" or a stage CSV path

  bool simulated() const { return source == kSimulateSource; }
};

struct SimulationSettings {
  sim::EcmParameters params = sim::EcmParameters::defaults();
  sim::DegradationSchedule schedule = sim::DegradationSchedule::defaults();
  sim::HppcProfile profile = sim::HppcProfile::defaults();
  double noise_std = 0.0;  // additive Gaussian voltage noise [V]
};

struct CampaignConfig {
  std::vector<StageSpec> stages;
  Eigen::Index embedding_dim = 60;
  bool centering = true;
  RankSpec rank_state = RankSpec::energy(0.9999);
  RankSpec rank_joint = RankSpec::energy(0.9999);
  double epsilon = kDefaultEpsilon;
  std::filesystem::path output_dir;  // empty: run_campaign writes nothing
  std::uint64_t seed = 0;
  SimulationSettings simulation;
  unsigned threads = 0;  // 0: one worker per hardware thread

  /// Throws Error(Config) when an invariant is violated.
  void validate() const;

  DmdcConfig dmdc() const { return {rank_state, rank_joint}; }

  /// Cycles 0, 20, ..., 360, all simulated.
  static CampaignConfig defaults();
};

/// "12" is a count; anything with a decimal point or exponent is an energy
/// fraction ("0.9999", "1.0").
RankSpec parse_rank(std::string_view text);

nlohmann::json to_json(const CampaignConfig& config);

/// Overlays the keys present in `doc` onto `base`. Unknown keys are a config
/// error. Relative stage paths resolve against `base_dir`.
CampaignConfig apply_json(const nlohmann::json& doc, CampaignConfig base,
                          const std::filesystem::path& base_dir = {});

CampaignConfig load_config(const std::filesystem::path& path,
                           CampaignConfig base = CampaignConfig::defaults());

struct StageResult {
  int cycle = 0;
  DmdcModel<double> model;
  GraphMetrics<double> metrics;
  double one_step_rmse = 0.0;
  double voltage_std = 0.0;
};

struct ReportRow {
  int cycle = 0;
  double mu = 0.0;
  Eigen::Index edges = 0;
  double connectivity = 0.0;
  double q_proxy = 0.0;
  Eigen::Index n_rows = 0;
  Eigen::Index n_cols = 0;
  double one_step_rmse = 0.0;
  // report.json only
  Eigen::Index rank_state = 0;
  Eigen::Index rank_joint = 0;
  double voltage_std = 0.0;
};

struct CampaignReport {
  std::vector<ReportRow> rows;         // ordered by cycle
  std::vector<ModeSurface> surfaces;   // parallel to rows
  nlohmann::json config_echo;
  std::string tool_version;
};

/// Simulates the stage or reads its CSV.
sim::TimeSeries load_stage(const StageSpec& stage, const CampaignConfig& config);

/// Errors carry the stage cycle in their message.
StageResult run_stage(const sim::TimeSeries& series, const CampaignConfig& config);

ReportRow make_row(const StageResult& result);

/// Runs all stages concurrently and assembles the report in cycle order. When
/// config.output_dir is set the report is exported there.
CampaignReport run_campaign(const CampaignConfig& config);

std::string metrics_csv(const std::vector<ReportRow>& rows);
std::vector<ReportRow> parse_metrics_csv(std::string_view text, const std::string& source = "<memory>");
std::string report_json(const CampaignReport& report);
std::string mode_file_name(int cycle);

/// Writes metrics.csv, report.json and modes/stage_<cycle>_modes.csv.
void export_report(const CampaignReport& report, const std::filesystem::path& dir);

}  // namespace dmdgraph::pipeline
