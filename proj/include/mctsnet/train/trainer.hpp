#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mctsnet/train/estimator.hpp"

namespace mctsnet::train {

using nn::Gradients;

struct StepMetrics {
  double loss = 0.0;  // mean l_M over the batch
  std::vector<double> per_sim;  // mean l_1..l_M
  double grad_norm = 0.0;
  double entropy = 0.0;
  double score_weight = 0.0;
};

struct StepConfig {
  int simulations = 10;
  // When positive, each example draws M uniformly from
  // [min_simulations, simulations]; per-simulation losses past the drawn M
  // repeat l_M.
  int min_simulations = 0;
  CreditConfig credit{};
  double learning_rate = 5e-4;
  int workers = 1;
};

// Estimator gradient for one example, written into `sink`.
StepMetrics example_gradient(const ParamStore& store, const net::SubnetConfig& config, const LabeledExample& example,
                             const net::EnvModel& env, const StepConfig& step, std::uint64_t seed, Gradients& sink);

// Averages the per-example estimator gradients of the batch and applies one
// SGD step. Every example draws its own seed from `rng` and the gradients
// are merged in batch order, so the result does not depend on `workers`.
StepMetrics gradient_step(ParamStore& store, const net::SubnetConfig& config,
                          std::span<const LabeledExample* const> batch, const net::EnvModel& env,
                          const StepConfig& step, std::mt19937_64& rng);

struct PriorTrainConfig {
  int epochs = 5;
  double learning_rate = 0.01;
  double entropy_coeff = 0.01;
};

struct PriorReport {
  double loss = 0.0;  // mean cross-entropy over the dataset
  double accuracy = 0.0;  // top-1 agreement with the labels
};

// Supervised cross-entropy training of the policy prior with an entropy
// bonus. Only prior.* parameters move; the store's step counter is kept.
PriorReport train_policy_prior(ParamStore& store, const net::SubnetConfig& config,
                               const std::vector<LabeledExample>& data, const PriorTrainConfig& options,
                               std::mt19937_64& rng);
PriorReport evaluate_prior(const ParamStore& store, const net::SubnetConfig& config,
                           const std::vector<LabeledExample>& data);

struct TrainConfig {
  net::SubnetConfig net{};
  StepConfig step{};
  bool sham = false;
  int batch = 1;
  long steps = 1000;
  long log_every = 100;
  long eval_every = 2000;  // 0 disables evaluation
  long checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::string checkpoint_dir;
  std::uint64_t seed = 1;
  // When positive, the basic estimator's baseline tracks l_M as an
  // exponential moving average with this decay.
  double baseline_decay = 0.0;

  void validate() const;
};

struct TrainSummary {
  long steps = 0;
  double last_loss = 0.0;  // mean l_M over the final logging window
  std::optional<double> last_success;
  bool finite = true;
};

// Header of the metrics stream for M simulations.
std::string metrics_header(int simulations);

// Runs `steps` gradient steps over reshuffled epochs of `data`, continuing
// from the store's step counter. Writes one CSV row per logging window and
// calls `evaluate` every eval_every steps for the success_ratio column.
TrainSummary train_loop(const TrainConfig& config, ParamStore& store, const std::vector<LabeledExample>& data,
                        std::ostream* metrics, const std::function<double(const ParamStore&)>& evaluate = {});

}  // namespace mctsnet::train
