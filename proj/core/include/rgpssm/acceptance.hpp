#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rgpssm::bench {

struct AcceptanceOptions {
  std::string daisy_dir;  ///< directory with dryer.dat / ballbeam.dat; empty skips that check
  uint64_t seed = 2024;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
  double seconds = 0.0;
};

/// Full verification suite: numerical-equivalence properties, gradient
/// certification, the synthetic learning tasks, and the performance and
/// stability checks. Returns one result per criterion.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

/// True when every non-skipped criterion passed.
bool all_passed(const std::vector<CriterionResult>& results);

/// One formatted line per criterion ("PASS tag: detail").
std::string format_results(const std::vector<CriterionResult>& results);

}  // namespace rgpssm::bench
