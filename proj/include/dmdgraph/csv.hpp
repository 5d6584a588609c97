#pragma once

// Locale-independent CSV reading and writing. Numbers are written with up to
// 15 significant digits and lines end in LF.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dmdgraph/battery_sim.hpp"
#include "dmdgraph/dmdc.hpp"

namespace dmdgraph::io {

inline constexpr std::string_view kTimeSeriesHeader = "time_s,current_a,voltage_v";
inline constexpr std::string_view kModeHeader = "mode_idx,embed_idx,magnitude,phase_rad,masked";

std::string format_number(double value);

/// Throws Error(Data) unless the whole field is a number.
double parse_number(std::string_view field);

struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Parses comma-separated numeric text. When `expected_header` is nonempty
/// the first line must match it exactly.
NumericTable parse_numeric_csv(std::string_view text, const std::vector<std::string>& expected_header,
                               const std::string& source = "<memory>");
NumericTable read_numeric_csv(const std::filesystem::path& path,
                              const std::vector<std::string>& expected_header);

std::string read_text_file(const std::filesystem::path& path);
/// Writes bytes verbatim; throws Error(Io) on failure.
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::string time_series_csv(const sim::TimeSeries& series);
void write_time_series(const sim::TimeSeries& series, const std::filesystem::path& path);

/// Reads a stage file and checks uniform sampling. The cycle label is not
/// part of the file and is supplied by the caller.
sim::TimeSeries parse_time_series(std::string_view text, int cycle, const std::string& source = "<memory>");
sim::TimeSeries read_time_series(const std::filesystem::path& path, int cycle);

/// Conventional stage file name, `stage_<cycle>.csv`.
std::string stage_file_name(int cycle);

/// Long-form mode export: one row per (mode, embedding coordinate), modes
/// outermost, indices zero-based.
std::string mode_csv(const ModeSurface& surface);
void write_mode_csv(const ModeSurface& surface, const std::filesystem::path& path);
ModeSurface parse_mode_csv(std::string_view text, const std::string& source = "<memory>");
ModeSurface read_mode_csv(const std::filesystem::path& path);

}  // namespace dmdgraph::io
