#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "mctsnet/net/search.hpp"
#include "mctsnet/train/dataset.hpp"

namespace mctsnet::train {

using net::Graph;
using net::ParamStore;
using net::Var;

enum class EstimatorKind { basic, anytime };
EstimatorKind parse_estimator(std::string_view s);
std::string_view estimator_name(EstimatorKind k);

struct CreditConfig {
  double gamma = 1.0;
  double entropy_coeff = 0.01;
  EstimatorKind estimator = EstimatorKind::anytime;
  // Subtracted from l_M in the basic estimator's score weight.
  double baseline = 0.0;

  void validate() const;
};

// r_m = l_{m-1} - l_m with l_0 = 0.
std::vector<double> telescoping_rewards(std::span<const double> losses);
// R_m = r_m + gamma * R_{m+1}, R_{M+1} = 0.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

struct ExampleLoss {
  Var loss;  // l_M on the tape
  double value = 0.0;
  std::vector<double> per_sim;  // l_1..l_M
  net::SearchResult search;
};

// Runs one search from the example's state and scores every per-simulation
// readout against the label.
ExampleLoss loss_and_traces(Graph& g, const net::SubnetConfig& config, const LabeledExample& example, int simulations,
                            const net::EnvModel& env, std::mt19937_64& rng, const net::SearchOptions& options = {});

// Per-simulation weights of log pi(z_m) in the surrogate objective whose
// gradient is the estimator: basic weights every simulation by
// l_M - baseline, anytime by -R_m.
std::vector<double> score_weights(std::span<const double> per_sim_losses, const CreditConfig& credit);

struct Surrogate {
  Var objective;
  double entropy = 0.0;  // mean policy entropy over decision points
  double score_weight = 0.0;  // mean squared score weight per decision
};

// l_M + sum_m w_m log pi(z_m) - entropy_coeff * sum of decision entropies.
// Differentiating it yields the chosen estimator.
Surrogate build_surrogate(Graph& g, const ExampleLoss& example, const CreditConfig& credit);

}  // namespace mctsnet::train
