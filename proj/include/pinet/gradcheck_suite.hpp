#pragma once

#include <string>
#include <vector>

#include "pinet/nn.hpp"

namespace pinet {

struct ComponentCheck {
  std::string component;
  nn::GradCheckResult result;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<ComponentCheck> checks;
  double worst = 0.0;
  std::string worst_component;
  std::string worst_coord;
  bool all_passed = false;
  double wall_seconds = 0.0;
};

inline constexpr double kGradCheckTolerance = 1e-5;
inline constexpr double kGradCheckEps = 1e-5;

/// Finite-difference verification of every differentiable primitive (dense
/// layer + L1, GRU cell, stacked bidirectional GRU, row softmax, attention
/// score map, rectified head) and of the end-to-end training loss on a
/// three-person scene, each at three seeds derived from base_seed.
GradCheckReport run_gradcheck_suite(std::uint64_t base_seed);

}  // namespace pinet
