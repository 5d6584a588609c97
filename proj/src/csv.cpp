#include "dmdgraph/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dmdgraph/error.hpp"

namespace dmdgraph::io {

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 15);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view field) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (field.empty() || res.ec != std::errc() || res.ptr != last)
    throw Error(ErrorKind::Data, "not a number: '" + std::string(field) + "'");
  return value;
}

NumericTable parse_numeric_csv(std::string_view text, const std::vector<std::string>& expected_header,
                               const std::string& source) {
  NumericTable table;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = trim_cr(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line);
    if (table.header.empty()) {
      for (auto f : fields) table.header.emplace_back(f);
      if (!expected_header.empty() && table.header != expected_header) {
        throw Error(ErrorKind::Data, source + ": expected header '" + join(expected_header) + "', got '" +
                                         std::string(line) + "'");
      }
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorKind::Data, source + ":" + std::to_string(line_no) + ": expected " +
                                       std::to_string(table.header.size()) + " fields, got " +
                                       std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    try {
      for (auto f : fields) row.push_back(parse_number(f));
    } catch (const Error& e) {
      throw Error(ErrorKind::Data, source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw Error(ErrorKind::Data, source + ": empty file");
  return table;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

NumericTable read_numeric_csv(const std::filesystem::path& path,
                              const std::vector<std::string>& expected_header) {
  return parse_numeric_csv(read_text_file(path), expected_header, path.string());
}

std::string time_series_csv(const sim::TimeSeries& series) {
  std::string out(kTimeSeriesHeader);
  out += '\n';
  for (const auto& s : series.samples) {
    out += format_number(s.time_s);
    out += ',';
    out += format_number(s.current_a);
    out += ',';
    out += format_number(s.voltage_v);
    out += '\n';
  }
  return out;
}

void write_time_series(const sim::TimeSeries& series, const std::filesystem::path& path) {
  write_text_file(path, time_series_csv(series));
}

sim::TimeSeries parse_time_series(std::string_view text, int cycle, const std::string& source) {
  const auto table = parse_numeric_csv(text, {"time_s", "current_a", "voltage_v"}, source);
  if (table.rows.size() < 2) throw Error(ErrorKind::Data, source + ": need at least two samples");
  sim::TimeSeries series;
  series.cycle = cycle;
  series.sample_period = table.rows[1][0] - table.rows[0][0];
  if (!(series.sample_period > 0.0))
    throw Error(ErrorKind::Data, source + ": timestamps must be strictly increasing");
  const double tol = 1e-9 * std::max(1.0, std::abs(table.rows.back()[0]));
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const auto& row = table.rows[k];
    const double expected = table.rows[0][0] + static_cast<double>(k) * series.sample_period;
    if (std::abs(row[0] - expected) > tol)
      throw Error(ErrorKind::Data, source + ": non-uniform sampling at row " + std::to_string(k + 2));
    series.samples.push_back({row[0], row[1], row[2]});
  }
  return series;
}

sim::TimeSeries read_time_series(const std::filesystem::path& path, int cycle) {
  return parse_time_series(read_text_file(path), cycle, path.string());
}

std::string stage_file_name(int cycle) { return "stage_" + std::to_string(cycle) + ".csv"; }

std::string mode_csv(const ModeSurface& surface) {
  std::string out(kModeHeader);
  out += '\n';
  for (Eigen::Index j = 0; j < surface.magnitude.cols(); ++j) {
    for (Eigen::Index i = 0; i < surface.magnitude.rows(); ++i) {
      out += std::to_string(j);
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += format_number(surface.magnitude(i, j));
      out += ',';
      out += format_number(surface.phase(i, j));
      out += ',';
      out += surface.masked(i, j) ? '1' : '0';
      out += '\n';
    }
  }
  return out;
}

void write_mode_csv(const ModeSurface& surface, const std::filesystem::path& path) {
  write_text_file(path, mode_csv(surface));
}

ModeSurface parse_mode_csv(std::string_view text, const std::string& source) {
  const auto table = parse_numeric_csv(text, {"mode_idx", "embed_idx", "magnitude", "phase_rad", "masked"}, source);
  Eigen::Index modes = 0;
  Eigen::Index dim = 0;
  for (const auto& row : table.rows) {
    modes = std::max(modes, static_cast<Eigen::Index>(row[0]) + 1);
    dim = std::max(dim, static_cast<Eigen::Index>(row[1]) + 1);
  }
  if (static_cast<std::size_t>(modes * dim) != table.rows.size())
    throw Error(ErrorKind::Data, source + ": mode table is not a complete grid");
  ModeSurface surface;
  surface.magnitude.setZero(dim, modes);
  surface.phase.setZero(dim, modes);
  surface.masked.setConstant(dim, modes, false);
  for (const auto& row : table.rows) {
    const auto j = static_cast<Eigen::Index>(row[0]);
    const auto i = static_cast<Eigen::Index>(row[1]);
    if (row[0] < 0 || row[1] < 0) throw Error(ErrorKind::Data, source + ": negative index");
    surface.magnitude(i, j) = row[2];
    surface.phase(i, j) = row[3];
    surface.masked(i, j) = row[4] != 0.0;
  }
  return surface;
}

ModeSurface read_mode_csv(const std::filesystem::path& path) {
  return parse_mode_csv(read_text_file(path), path.string());
}

}  // namespace dmdgraph::io
