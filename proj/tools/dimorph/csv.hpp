#pragma once

#include <span>
#include <string>
#include <vector>

#include "dimorph/ibm.hpp"
#include "dimorph/macro_solver.hpp"
#include "dimorph/measures.hpp"

namespace dimorph::cli {

/// Locale-independent rendering with 17 significant digits.
std::string format_double(double v);

/// One measure of a snapshot, tagged with its component name.
struct DistributionFrame {
  double t = 0.0;
  std::vector<std::pair<std::string, GridMeasure>> components;
};

std::vector<DistributionFrame> frames_of(std::span<const MacroState> snapshots, const std::string& first = "male",
                                         const std::string& second = "female");
std::vector<DistributionFrame> frames_of(std::span<const IbmSnapshot> snapshots);

/// CSV text with header `time,component,cell_center,weight` and one row per cell.
std::string distribution_csv(std::span<const DistributionFrame> frames);

/// Writes distribution_csv atomically.
void emit_distribution_csv(std::span<const DistributionFrame> frames, const std::string& path);

struct DistributionRow {
  double time = 0.0;
  std::string component;
  double cell_center = 0.0;
  double weight = 0.0;
};

/// Parses a file written by emit_distribution_csv. Throws std::runtime_error on malformed rows.
std::vector<DistributionRow> load_distribution_csv(const std::string& path);
std::vector<DistributionRow> parse_distribution_csv(const std::string& text);

/// Reads a measure from rows `cell_center,weight` (header optional) and bins it onto grid.
GridMeasure load_measure_csv(const std::string& path, const TraitGrid& grid);

/// Generic table writer: header plus rows of numbers.
std::string numeric_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);

}  // namespace dimorph::cli
