#include "dmdgraph/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <optional>
#include <set>
#include <thread>

#include "dmdgraph/csv.hpp"
#include "dmdgraph/error.hpp"

#ifndef DMDGRAPH_VERSION
#define DMDGRAPH_VERSION "0.0.0"
#endif

namespace dmdgraph::pipeline {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::Config, what); }

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    config_error("key '" + key + "' has the wrong type");
  }
}

double get_number(const json& obj, const std::string& key) {
  const auto& v = obj.at(key);
  if (!v.is_number()) config_error("key '" + key + "' must be a number");
  return v.get<double>();
}

RankSpec rank_from_json(const json& v, const std::string& key) {
  RankSpec spec;
  if (v.is_number_integer() || v.is_number_unsigned()) {
    spec = RankSpec::count(v.get<Eigen::Index>());
  } else if (v.is_number_float()) {
    spec = RankSpec::energy(v.get<double>());
  } else if (v.is_string()) {
    spec = parse_rank(v.get<std::string>());
  } else {
    config_error("key '" + key + "' must be a count or an energy fraction");
  }
  spec.validate();
  return spec;
}

json rank_to_json(const RankSpec& spec) {
  if (spec.is_count()) return static_cast<std::int64_t>(spec.value);
  return spec.value;
}

void apply_ecm(const json& doc, sim::EcmParameters& p, const std::filesystem::path& base_dir) {
  reject_unknown_keys(doc, {"r0", "r1", "c1", "r2", "c2", "capacity_ah", "ocv_table", "ocv_table_file"}, "ecm");
  if (doc.contains("r0")) p.r0 = get_number(doc, "r0");
  if (doc.contains("r1")) p.r1 = get_number(doc, "r1");
  if (doc.contains("c1")) p.c1 = get_number(doc, "c1");
  if (doc.contains("r2")) p.r2 = get_number(doc, "r2");
  if (doc.contains("c2")) p.c2 = get_number(doc, "c2");
  if (doc.contains("capacity_ah")) p.capacity_ah = get_number(doc, "capacity_ah");
  if (doc.contains("ocv_table_file")) {
    std::filesystem::path file = get_as<std::string>(doc.at("ocv_table_file"), "ocv_table_file");
    if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
    p.ocv_table = sim::load_ocv_table(file);
  }
  if (doc.contains("ocv_table")) {
    p.ocv_table.clear();
    for (const auto& pt : doc.at("ocv_table")) {
      if (!pt.is_array() || pt.size() != 2) config_error("ocv_table entries must be [soc, voltage] pairs");
      p.ocv_table.push_back({get_as<double>(pt[0], "ocv_table"), get_as<double>(pt[1], "ocv_table")});
    }
  }
}

void apply_schedule(const json& doc, sim::DegradationSchedule& s) {
  reject_unknown_keys(doc, {"r0_growth_per_cycle", "capacity_fade_per_cycle", "rc_drift_per_cycle"}, "schedule");
  if (doc.contains("r0_growth_per_cycle")) s.r0_growth_per_cycle = get_number(doc, "r0_growth_per_cycle");
  if (doc.contains("capacity_fade_per_cycle"))
    s.capacity_fade_per_cycle = get_number(doc, "capacity_fade_per_cycle");
  if (doc.contains("rc_drift_per_cycle")) s.rc_drift_per_cycle = get_number(doc, "rc_drift_per_cycle");
}

void apply_profile(const json& doc, sim::HppcProfile& p) {
  reject_unknown_keys(doc,
                      {"pulse_current", "pulse_duration", "rest_duration", "transition_current", "soc_steps",
                       "sample_period", "initial_soc"},
                      "profile");
  if (doc.contains("pulse_current")) p.pulse_current = get_number(doc, "pulse_current");
  if (doc.contains("pulse_duration")) p.pulse_duration = get_number(doc, "pulse_duration");
  if (doc.contains("rest_duration")) p.rest_duration = get_number(doc, "rest_duration");
  if (doc.contains("transition_current")) p.transition_current = get_number(doc, "transition_current");
  if (doc.contains("soc_steps")) p.soc_steps = get_as<std::vector<double>>(doc.at("soc_steps"), "soc_steps");
  if (doc.contains("sample_period")) p.sample_period = get_number(doc, "sample_period");
  if (doc.contains("initial_soc")) p.initial_soc = get_number(doc, "initial_soc");
}

double sample_std(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size()));
}

}  // namespace

std::string_view tool_version() { return DMDGRAPH_VERSION; }

void CampaignConfig::validate() const {
  if (stages.empty()) config_error("campaign needs at least one stage");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i].cycle < 0) config_error("stage cycles must be >= 0");
    if (i > 0 && !(stages[i].cycle > stages[i - 1].cycle))
      config_error("stage cycles must be strictly increasing");
    if (stages[i].source.empty()) config_error("stage source must not be empty");
  }
  if (embedding_dim < 1) config_error("embedding_dim must be >= 1");
  rank_state.validate();
  rank_joint.validate();
  if (rank_state.is_count() && rank_joint.is_count() && rank_state.value > rank_joint.value)
    config_error("rank_state must not exceed rank_joint");
  if (!(epsilon > 0.0)) config_error("epsilon must be > 0");
  if (!(simulation.noise_std >= 0.0)) config_error("noise_std must be >= 0");
}

CampaignConfig CampaignConfig::defaults() {
  CampaignConfig c;
  for (int cycle = 0; cycle <= 360; cycle += 20) c.stages.push_back({cycle, std::string(kSimulateSource)});
  return c;
}

RankSpec parse_rank(std::string_view text) {
  if (text.empty()) config_error("empty rank specification");
  double value = 0.0;
  try {
    value = io::parse_number(text);
  } catch (const Error&) {
    config_error("invalid rank specification '" + std::string(text) + "'");
  }
  const bool fractional = text.find_first_of(".eE") != std::string_view::npos;
  RankSpec spec = fractional ? RankSpec::energy(value) : RankSpec{RankSpec::Kind::Count, value};
  spec.validate();
  return spec;
}

json to_json(const CampaignConfig& c) {
  json stages = json::array();
  for (const auto& s : c.stages) stages.push_back({{"cycle", s.cycle}, {"source", s.source}});
  json ocv = json::array();
  for (const auto& pt : c.simulation.params.ocv_table) ocv.push_back({pt.soc, pt.voltage});
  const auto& p = c.simulation.params;
  const auto& sch = c.simulation.schedule;
  const auto& pr = c.simulation.profile;
  return {
      {"stages", stages},
      {"embedding_dim", c.embedding_dim},
      {"centering", c.centering},
      {"rank_state", rank_to_json(c.rank_state)},
      {"rank_joint", rank_to_json(c.rank_joint)},
      {"epsilon", c.epsilon},
      {"output_dir", c.output_dir.generic_string()},
      {"seed", c.seed},
      {"simulation",
       {{"ecm",
         {{"r0", p.r0},
          {"r1", p.r1},
          {"c1", p.c1},
          {"r2", p.r2},
          {"c2", p.c2},
          {"capacity_ah", p.capacity_ah},
          {"ocv_table", ocv}}},
        {"schedule",
         {{"r0_growth_per_cycle", sch.r0_growth_per_cycle},
          {"capacity_fade_per_cycle", sch.capacity_fade_per_cycle},
          {"rc_drift_per_cycle", sch.rc_drift_per_cycle}}},
        {"profile",
         {{"pulse_current", pr.pulse_current},
          {"pulse_duration", pr.pulse_duration},
          {"rest_duration", pr.rest_duration},
          {"transition_current", pr.transition_current},
          {"soc_steps", pr.soc_steps},
          {"sample_period", pr.sample_period},
          {"initial_soc", pr.initial_soc}}},
        {"noise_std", c.simulation.noise_std}}},
  };
}

CampaignConfig apply_json(const json& doc, CampaignConfig c, const std::filesystem::path& base_dir) {
  reject_unknown_keys(doc,
                      {"stages", "embedding_dim", "centering", "rank_state", "rank_joint", "epsilon", "output_dir",
                       "seed", "simulation", "threads"},
                      "campaign config");
  if (doc.contains("stages")) {
    c.stages.clear();
    const auto& stages = doc.at("stages");
    if (!stages.is_array()) config_error("stages must be an array");
    for (const auto& s : stages) {
      reject_unknown_keys(s, {"cycle", "source"}, "stage");
      if (!s.contains("cycle")) config_error("stage entry needs a cycle");
      StageSpec spec;
      spec.cycle = get_as<int>(s.at("cycle"), "cycle");
      if (s.contains("source")) spec.source = get_as<std::string>(s.at("source"), "source");
      if (!spec.simulated()) {
        std::filesystem::path src = spec.source;
        if (src.is_relative() && !base_dir.empty()) spec.source = (base_dir / src).generic_string();
      }
      c.stages.push_back(std::move(spec));
    }
  }
  if (doc.contains("embedding_dim")) c.embedding_dim = get_as<Eigen::Index>(doc.at("embedding_dim"), "embedding_dim");
  if (doc.contains("centering")) c.centering = get_as<bool>(doc.at("centering"), "centering");
  if (doc.contains("rank_state")) c.rank_state = rank_from_json(doc.at("rank_state"), "rank_state");
  if (doc.contains("rank_joint")) c.rank_joint = rank_from_json(doc.at("rank_joint"), "rank_joint");
  if (doc.contains("epsilon")) c.epsilon = get_number(doc, "epsilon");
  if (doc.contains("output_dir")) c.output_dir = get_as<std::string>(doc.at("output_dir"), "output_dir");
  if (doc.contains("seed")) c.seed = get_as<std::uint64_t>(doc.at("seed"), "seed");
  if (doc.contains("threads")) c.threads = get_as<unsigned>(doc.at("threads"), "threads");
  if (doc.contains("simulation")) {
    const auto& simdoc = doc.at("simulation");
    reject_unknown_keys(simdoc, {"ecm", "schedule", "profile", "noise_std"}, "simulation");
    if (simdoc.contains("ecm")) apply_ecm(simdoc.at("ecm"), c.simulation.params, base_dir);
    if (simdoc.contains("schedule")) apply_schedule(simdoc.at("schedule"), c.simulation.schedule);
    if (simdoc.contains("profile")) apply_profile(simdoc.at("profile"), c.simulation.profile);
    if (simdoc.contains("noise_std")) c.simulation.noise_std = get_number(simdoc, "noise_std");
  }
  return c;
}

CampaignConfig load_config(const std::filesystem::path& path, CampaignConfig base) {
  const std::string text = io::read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(path.string() + ": " + e.what());
  }
  return apply_json(doc, std::move(base), path.parent_path());
}

sim::TimeSeries load_stage(const StageSpec& stage, const CampaignConfig& config) {
  if (!stage.simulated()) return io::read_time_series(stage.source, stage.cycle);
  const auto& s = config.simulation;
  const auto params = sim::degrade_params(s.params, stage.cycle, s.schedule);
  auto series = sim::generate_hppc(params, s.profile, stage.cycle);
  sim::add_voltage_noise(series, s.noise_std, config.seed);
  return series;
}

StageResult run_stage(const sim::TimeSeries& series, const CampaignConfig& config) {
  try {
    StageResult out;
    out.cycle = series.cycle;
    const auto raw = build_snapshots(series, config.embedding_dim);
    const auto data = config.centering ? center_snapshots(raw) : uncentered(raw);
    out.model = fit(data, config.dmdc());
    out.metrics = analyze_graph(WeightedGraph<double>::from_modes(out.model), config.epsilon);
    out.one_step_rmse = one_step_rmse(out.model, raw);
    out.voltage_std = sample_std(series.voltages());
    return out;
  } catch (const Error& e) {
    throw Error(e.kind(), "stage cycle " + std::to_string(series.cycle) + ": " + e.what());
  }
}

ReportRow make_row(const StageResult& r) {
  ReportRow row;
  row.cycle = r.cycle;
  row.mu = r.metrics.mu;
  row.edges = r.metrics.edges;
  row.connectivity = r.metrics.connectivity;
  row.q_proxy = r.metrics.q_proxy;
  row.n_rows = r.model.phi.rows();
  row.n_cols = r.model.phi.cols();
  row.one_step_rmse = r.one_step_rmse;
  row.rank_state = r.model.rank_state();
  row.rank_joint = r.model.rank_joint();
  row.voltage_std = r.voltage_std;
  return row;
}

CampaignReport run_campaign(const CampaignConfig& config) {
  config.validate();
  const std::size_t n = config.stages.size();
  std::vector<std::optional<ReportRow>> rows(n);
  std::vector<std::optional<ModeSurface>> surfaces(n);
  std::vector<std::optional<Error>> failures(n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& stage = config.stages[i];
      try {
        const auto series = load_stage(stage, config);
        const auto result = run_stage(series, config);
        rows[i] = make_row(result);
        surfaces[i] = mode_surface(result.model);
      } catch (const Error& e) {
        const std::string msg = e.what();
        const bool tagged = msg.rfind("stage cycle ", 0) == 0;
        failures[i] = Error(e.kind(), tagged ? msg : "stage cycle " + std::to_string(stage.cycle) + ": " + msg);
      } catch (const std::exception& e) {
        failures[i] = Error(ErrorKind::Numerical, "stage cycle " + std::to_string(stage.cycle) + ": " + e.what());
      }
    }
  };

  unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
  }

  std::string diagnostics;
  std::optional<ErrorKind> kind;
  for (const auto& f : failures) {
    if (!f) continue;
    if (!kind) kind = f->kind();
    diagnostics += std::string(diagnostics.empty() ? "" : "\n") + f->what();
  }
  if (kind) throw Error(*kind, "campaign aborted:\n" + diagnostics);

  CampaignReport report;
  report.tool_version = std::string(tool_version());
  report.config_echo = to_json(config);
  for (std::size_t i = 0; i < n; ++i) {
    report.rows.push_back(*rows[i]);
    report.surfaces.push_back(std::move(*surfaces[i]));
  }
  if (!config.output_dir.empty()) export_report(report, config.output_dir);
  return report;
}

std::string metrics_csv(const std::vector<ReportRow>& rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.cycle) + ',' + io::format_number(r.mu) + ',' + std::to_string(r.edges) + ',' +
           io::format_number(r.connectivity) + ',' + io::format_number(r.q_proxy) + ',' +
           std::to_string(r.n_rows) + ',' + std::to_string(r.n_cols) + ',' + io::format_number(r.one_step_rmse) +
           '\n';
  }
  return out;
}

std::vector<ReportRow> parse_metrics_csv(std::string_view text, const std::string& source) {
  const auto table = io::parse_numeric_csv(
      text, {"cycle", "mu", "edges", "connectivity", "q_proxy", "n_rows", "n_cols", "one_step_rmse"}, source);
  std::vector<ReportRow> rows;
  for (const auto& f : table.rows) {
    ReportRow r;
    r.cycle = static_cast<int>(f[0]);
    r.mu = f[1];
    r.edges = static_cast<Eigen::Index>(f[2]);
    r.connectivity = f[3];
    r.q_proxy = f[4];
    r.n_rows = static_cast<Eigen::Index>(f[5]);
    r.n_cols = static_cast<Eigen::Index>(f[6]);
    r.one_step_rmse = f[7];
    rows.push_back(r);
  }
  return rows;
}

std::string mode_file_name(int cycle) { return "stage_" + std::to_string(cycle) + "_modes.csv"; }

std::string report_json(const CampaignReport& report) {
  json stages = json::array();
  for (const auto& r : report.rows) {
    stages.push_back({{"cycle", r.cycle},
                      {"mu", r.mu},
                      {"edges", r.edges},
                      {"connectivity", r.connectivity},
                      {"q_proxy", r.q_proxy},
                      {"n_rows", r.n_rows},
                      {"n_cols", r.n_cols},
                      {"one_step_rmse", r.one_step_rmse},
                      {"rank_state", r.rank_state},
                      {"rank_joint", r.rank_joint},
                      {"voltage_std", r.voltage_std},
                      {"modes_file", "modes/" + mode_file_name(r.cycle)}});
  }
  const json doc = {{"tool_version", report.tool_version}, {"config_echo", report.config_echo}, {"stages", stages}};
  return doc.dump(2) + '\n';
}

void export_report(const CampaignReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "modes", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
  io::write_text_file(dir / "metrics.csv", metrics_csv(report.rows));
  io::write_text_file(dir / "report.json", report_json(report));
  for (std::size_t i = 0; i < report.rows.size() && i < report.surfaces.size(); ++i)
    io::write_mode_csv(report.surfaces[i], dir / "modes" / mode_file_name(report.rows[i].cycle));
}

}  // namespace dmdgraph::pipeline
