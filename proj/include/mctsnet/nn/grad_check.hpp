#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mctsnet/nn/graph.hpp"
#include "mctsnet/nn/param_store.hpp"

namespace mctsnet::nn {

// Builds a scalar loss on a fresh graph. Must be a pure function of the
// parameter values (the same call is repeated for every perturbation).
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Number of (parameter, index) coordinates sampled; 0 checks everything.
  std::size_t samples = 200;
  // Restrict sampling to parameters with one of these name prefixes.
  std::vector<std::string> prefixes;
  std::uint64_t seed = 1;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  // Coordinates skipped as near a ReLU kink: the one-sided differences
  // disagree, or central differences at steps h and h/4 do.
  std::size_t skipped_kinks = 0;
  bool passed = false;
};

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

// Compares reverse-mode gradients against central differences. The store's
// gradient accumulators are zeroed before and after the check.
GradCheckReport grad_check(ParamStore& store, const LossBuilder& build, const GradCheckOptions& options = {});

// Forward-only evaluation of a builder's loss.
double evaluate_loss(const ParamStore& store, const LossBuilder& build);

}  // namespace mctsnet::nn
