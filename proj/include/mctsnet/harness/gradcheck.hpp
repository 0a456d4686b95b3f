#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mctsnet/nn/grad_check.hpp"

namespace mctsnet::harness {

struct GradientCheck {
  std::string name;
  nn::GradCheckReport report;
};

// Central-difference checks of every subnetwork and of the full search
// loss with the simulation choices frozen, on a small randomised network.
// Every coordinate of the named parameters is checked.
std::vector<GradientCheck> gradient_suite(std::uint64_t seed, double tolerance = 1e-4);

}  // namespace mctsnet::harness
