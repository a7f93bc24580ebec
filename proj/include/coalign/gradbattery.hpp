#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace coalign {

struct BatteryEntry {
  std::string loss;
  double max_rel_err = 0.0;
  std::size_t points = 0;
  bool pass = false;
};

struct BatteryReport {
  std::vector<BatteryEntry> entries;
  bool pass = false;
};

/// Checks the analytic gradients of the hinge, alignment, joint, and
/// description objectives against central finite differences on tiny frozen
/// fixtures, at `points` random parameter points each (eps 1e-5, tol 1e-4).
BatteryReport run_gradient_battery(int points, std::uint64_t seed);

void print_battery(const BatteryReport& report, std::ostream& os);

}  // namespace coalign
