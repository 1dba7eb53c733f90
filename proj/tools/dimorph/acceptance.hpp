#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace dimorph::cli {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  /// One-line summary of the measured quantities against their tolerances.
  std::string detail;
  double seconds = 0.0;
  nlohmann::json metrics = nlohmann::json::object();
};

struct AcceptanceOptions {
  /// Criteria to run (1..10); empty runs all.
  std::vector<int> criteria;
  std::size_t jobs = 1;
  std::uint64_t seed = 20240611;
  /// Called after each criterion finishes.
  std::function<void(const CriterionResult&)> on_result;
};

inline constexpr int kCriterionCount = 10;

CriterionResult run_criterion(int id, const AcceptanceOptions& options);
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);

/// "[PASS] C3 mean dynamics: ... (1.52 s)"
std::string verdict_line(const CriterionResult& r);
nlohmann::json to_json(const std::vector<CriterionResult>& results);

}  // namespace dimorph::cli
