#pragma once

#include <string>
#include <vector>

namespace microsim {

struct SelftestResult {
  std::vector<std::pair<std::string, bool>> checks;
  bool all_passed() const {
    for (const auto& [name, ok] : checks)
      if (!ok) return false;
    return true;
  }
};

// Fast invariant suite over the controllers, the network stack and the
// simulator (seconds, deterministic). Each entry is one named check.
SelftestResult run_selftest();

}  // namespace microsim
