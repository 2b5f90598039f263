#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fsvc {

struct SelftestCheck {
  std::string name;
  bool passed;
  std::string detail;
};

/// Built-in verification run by `fsvc selftest`: DTW against brute-force
/// enumeration, finite-difference checks of every hand-derived gradient, and
/// the imprinting argmax / cosine-template equivalence.
std::vector<SelftestCheck> run_selftest(std::uint64_t seed = 7);

/// Prints one line per check; returns 0 when all pass.
int report_selftest(const std::vector<SelftestCheck>& checks, std::ostream& out);

}  // namespace fsvc
