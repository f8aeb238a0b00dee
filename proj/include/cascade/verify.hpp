#pragma once

#include <string>
#include <vector>

#include "cascade/graph.hpp"

namespace cascade {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Reachability by boolean adjacency powers; levels only.
std::vector<std::vector<int>> reachability_oracle(const Graph& g, int depth);

// True if profile levels and frontiers agree with the oracle.
bool profile_matches_oracle(const Graph& g, int depth);

CheckResult check_bfs_oracle();
CheckResult check_permutation_equivariance();
CheckResult check_softmax_saturation();
CheckResult check_frontier_concentration();
CheckResult check_determinism();

std::vector<CheckResult> property_suite();

}  // namespace cascade
