// dmdgraph: battery degradation signatures from DMDc mode graphs.
//
//   dmdgraph simulate      write synthetic stage_<cycle>.csv files
//   dmdgraph analyze       one stage CSV -> metrics.csv, report.json, modes/
//   dmdgraph campaign      every configured stage -> full report
//   dmdgraph export-modes  one stage CSV -> mode magnitude/phase CSV
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <regex>
#include <string>

#include <CLI11.hpp>

#include "dmdgraph/csv.hpp"
#include "dmdgraph/error.hpp"
#include "dmdgraph/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dmdgraph;

namespace {

// Flags mirroring CampaignConfig. Precedence: flag > config file > default.
struct CommonFlags {
  std::optional<std::string> config;
  std::optional<Eigen::Index> embedding_dim;
  std::optional<bool> centering;
  std::optional<std::string> rank_state;
  std::optional<std::string> rank_joint;
  std::optional<double> epsilon;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise_std;
  std::optional<unsigned> threads;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config, "JSON campaign configuration file");
    app.add_option("--embedding-dim", embedding_dim, "Delay embedding dimension d");
    app.add_flag("--centering,!--no-centering", centering, "Subtract per-row snapshot means");
    app.add_option("--rank-state", rank_state, "Rank of X' (count, or energy fraction such as 0.9999)");
    app.add_option("--rank-joint", rank_joint, "Rank of [X; U] (count, or energy fraction)");
    app.add_option("--epsilon", epsilon, "Regularizer of the modularity proxy");
    app.add_option("-o,--output-dir", output_dir, "Output directory");
    app.add_option("--seed", seed, "Seed for simulated voltage noise");
    app.add_option("--noise-std", noise_std, "Simulated voltage noise standard deviation [V]");
    app.add_option("--threads", threads, "Worker threads (0 = all cores)");
  }

  pipeline::CampaignConfig resolve() const {
    auto cfg = pipeline::CampaignConfig::defaults();
    if (config) cfg = pipeline::load_config(*config, cfg);
    if (embedding_dim) cfg.embedding_dim = *embedding_dim;
    if (centering) cfg.centering = *centering;
    if (rank_state) cfg.rank_state = pipeline::parse_rank(*rank_state);
    if (rank_joint) cfg.rank_joint = pipeline::parse_rank(*rank_joint);
    if (epsilon) cfg.epsilon = *epsilon;
    if (output_dir) cfg.output_dir = *output_dir;
    if (seed) cfg.seed = *seed;
    if (noise_std) cfg.simulation.noise_std = *noise_std;
    if (threads) cfg.threads = *threads;
    return cfg;
  }
};

int cycle_from_name(const fs::path& path, std::optional<int> explicit_cycle) {
  if (explicit_cycle) return *explicit_cycle;
  static const std::regex pattern(R"(stage_(\d+)\.csv)");
  std::smatch m;
  const std::string name = path.filename().string();
  if (std::regex_match(name, m, pattern)) return std::stoi(m[1]);
  return 0;
}

void print_rows(const pipeline::CampaignReport& report) {
  std::cout << pipeline::metrics_csv(report.rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DMDc mode-graph degradation signatures for battery telemetry"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pipeline::tool_version()));

  CommonFlags sim_flags, analyze_flags, campaign_flags, modes_flags;

  auto* simulate = app.add_subcommand("simulate", "Write synthetic HPPC stage CSV files");
  sim_flags.attach(*simulate);

  auto* analyze = app.add_subcommand("analyze", "Analyze one stage CSV");
  analyze_flags.attach(*analyze);
  std::string analyze_input;
  std::optional<int> analyze_cycle;
  analyze->add_option("-i,--input", analyze_input, "Stage CSV (time_s,current_a,voltage_v)")->required();
  analyze->add_option("--cycle", analyze_cycle, "Cycle label (default: parsed from stage_<cycle>.csv)");

  auto* campaign = app.add_subcommand("campaign", "Run every configured stage and write the report");
  campaign_flags.attach(*campaign);

  auto* modes = app.add_subcommand("export-modes", "Export mode magnitude and phase surfaces of one stage");
  modes_flags.attach(*modes);
  std::string modes_input;
  std::optional<std::string> modes_output;
  std::optional<int> modes_cycle;
  modes->add_option("-i,--input", modes_input, "Stage CSV")->required();
  modes->add_option("--cycle", modes_cycle, "Cycle label");
  modes->add_option("--output", modes_output, "Mode CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate) {
      auto cfg = sim_flags.resolve();
      cfg.validate();
      const fs::path dir = cfg.output_dir.empty() ? fs::path("stages") : cfg.output_dir;
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
      for (const auto& stage : cfg.stages) {
        if (!stage.simulated()) continue;
        const auto series = pipeline::load_stage(stage, cfg);
        const fs::path file = dir / io::stage_file_name(stage.cycle);
        io::write_time_series(series, file);
        std::cout << file.string() << " (" << series.size() << " samples"
                  << (series.truncated ? ", truncated at voltage limit" : "") << ")\n";
      }
    } else if (*analyze) {
      auto cfg = analyze_flags.resolve();
      const int cycle = cycle_from_name(analyze_input, analyze_cycle);
      cfg.stages = {{cycle, analyze_input}};
      if (cfg.output_dir.empty()) cfg.output_dir = "analysis";
      print_rows(pipeline::run_campaign(cfg));
    } else if (*campaign) {
      auto cfg = campaign_flags.resolve();
      if (cfg.output_dir.empty()) cfg.output_dir = "campaign";
      const auto report = pipeline::run_campaign(cfg);
      print_rows(report);
      std::cerr << "wrote " << (cfg.output_dir / "metrics.csv").string() << "\n";
    } else if (*modes) {
      auto cfg = modes_flags.resolve();
      cfg.validate();
      const int cycle = cycle_from_name(modes_input, modes_cycle);
      const auto series = io::read_time_series(modes_input, cycle);
      const auto result = pipeline::run_stage(series, cfg);
      const auto csv = io::mode_csv(mode_surface(result.model));
      if (modes_output) {
        io::write_text_file(*modes_output, csv);
      } else {
        std::cout << csv;
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
