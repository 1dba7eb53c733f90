#include "csv.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "artifacts.hpp"

namespace dimorph::cli {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("csv line " + std::to_string(line) + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(const std::string& text) {
  std::vector<std::string_view> out;
  std::string_view rest(text);
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<DistributionFrame> frames_of(std::span<const MacroState> snapshots, const std::string& first,
                                         const std::string& second) {
  std::vector<DistributionFrame> out;
  out.reserve(snapshots.size());
  for (const MacroState& s : snapshots) out.push_back({s.t, {{first, s.m}, {second, s.f}}});
  return out;
}

std::vector<DistributionFrame> frames_of(std::span<const IbmSnapshot> snapshots) {
  std::vector<DistributionFrame> out;
  out.reserve(snapshots.size());
  for (const IbmSnapshot& s : snapshots) out.push_back({s.t, {{"male", s.male}, {"female", s.female}}});
  return out;
}

std::string distribution_csv(std::span<const DistributionFrame> frames) {
  std::string out = "time,component,cell_center,weight\n";
  for (const DistributionFrame& f : frames) {
    const std::string t = format_double(f.t);
    for (const auto& [name, m] : f.components) {
      const TraitGrid& g = m.grid();
      for (std::size_t i = 0; i < m.size(); ++i) {
        out += t;
        out += ',';
        out += name;
        out += ',';
        out += format_double(g.center(i));
        out += ',';
        out += format_double(m[i]);
        out += '\n';
      }
    }
  }
  return out;
}

void emit_distribution_csv(std::span<const DistributionFrame> frames, const std::string& path) {
  write_file_atomic(path, distribution_csv(frames));
}

std::vector<DistributionRow> parse_distribution_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "time,component,cell_center,weight") {
    throw std::runtime_error("distribution csv: missing header");
  }
  std::vector<DistributionRow> rows;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    const auto cells = split(lines[k]);
    if (cells.size() != 4) throw std::runtime_error("csv line " + std::to_string(k + 1) + ": expected 4 columns");
    rows.push_back({parse_double(cells[0], k + 1), std::string(cells[1]), parse_double(cells[2], k + 1),
                    parse_double(cells[3], k + 1)});
  }
  return rows;
}

std::vector<DistributionRow> load_distribution_csv(const std::string& path) {
  return parse_distribution_csv(read_text(path));
}

GridMeasure load_measure_csv(const std::string& path, const TraitGrid& grid) {
  const std::string text = read_text(path);
  std::vector<double> centers, weights;
  const auto lines = lines_of(text);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    const auto cells = split(lines[k]);
    if (cells.size() != 2) throw std::runtime_error(path + ":" + std::to_string(k + 1) + ": expected 2 columns");
    if (k == 0 && !cells[0].empty() && (std::isalpha(static_cast<unsigned char>(cells[0][0])) != 0)) continue;
    centers.push_back(parse_double(cells[0], k + 1));
    const double w = parse_double(cells[1], k + 1);
    if (w < 0.0) throw std::runtime_error(path + ":" + std::to_string(k + 1) + ": negative weight");
    weights.push_back(w);
  }
  return bin_points(grid, centers, weights);
}

std::string numeric_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) out += ',';
    out += header[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace dimorph::cli
