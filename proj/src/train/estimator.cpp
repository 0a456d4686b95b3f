#include "mctsnet/train/estimator.hpp"

#include <cmath>
#include <string>

#include "mctsnet/errors.hpp"
#include "mctsnet/nn/ops.hpp"

namespace mctsnet::train {

EstimatorKind parse_estimator(std::string_view s) {
  if (s == "basic") return EstimatorKind::basic;
  if (s == "anytime") return EstimatorKind::anytime;
  throw UsageError("unknown estimator '" + std::string(s) + "'");
}

std::string_view estimator_name(EstimatorKind k) { return k == EstimatorKind::basic ? "basic" : "anytime"; }

void CreditConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw UsageError("gamma must lie in [0, 1]");
  if (!(entropy_coeff >= 0.0)) throw UsageError("entropy coefficient must be non-negative");
  if (!std::isfinite(baseline)) throw UsageError("baseline must be finite");
}

std::vector<double> telescoping_rewards(std::span<const double> losses) {
  std::vector<double> out(losses.size());
  double prev = 0.0;
  for (std::size_t m = 0; m < losses.size(); ++m) {
    out[m] = prev - losses[m];
    prev = losses[m];
  }
  return out;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t m = rewards.size(); m-- > 0;) {
    acc = rewards[m] + gamma * acc;
    out[m] = acc;
  }
  return out;
}

ExampleLoss loss_and_traces(Graph& g, const net::SubnetConfig& config, const LabeledExample& example, int simulations,
                            const net::EnvModel& env, std::mt19937_64& rng, const net::SearchOptions& options) {
  net::MemoryTree tree(example.state);
  ExampleLoss out;
  out.search = net::run_search(g, config, tree, env, simulations, rng, options);
  const auto label = static_cast<std::size_t>(sokoban::index(example.label));
  for (const Var logits : out.search.per_sim_logits) {
    const auto lp = nn::softmax_values(g.value(logits).values());
    out.per_sim.push_back(-std::log(lp[label]));
  }
  const auto xent = nn::softmax_xent(g, out.search.per_sim_logits.back(), label);
  out.loss = xent.loss;
  out.value = g.value(xent.loss)[0];
  out.per_sim.back() = out.value;
  return out;
}

std::vector<double> score_weights(std::span<const double> per_sim_losses, const CreditConfig& credit) {
  std::vector<double> w(per_sim_losses.size());
  if (credit.estimator == EstimatorKind::basic) {
    for (auto& v : w) v = per_sim_losses.back() - credit.baseline;
    return w;
  }
  const auto returns = discounted_returns(telescoping_rewards(per_sim_losses), credit.gamma);
  for (std::size_t m = 0; m < w.size(); ++m) w[m] = -returns[m];
  return w;
}

Surrogate build_surrogate(Graph& g, const ExampleLoss& example, const CreditConfig& credit) {
  Surrogate out;
  Var total = example.loss;
  const auto weights = score_weights(example.per_sim, credit);
  std::size_t decisions = 0;
  double entropy_sum = 0.0, weight_sq = 0.0;
  for (std::size_t m = 0; m < example.search.traces.size(); ++m) {
    const auto& trace = example.search.traces[m];
    for (std::size_t t = 0; t < trace.log_probs.size(); ++t) {
      total = nn::add(g, total, nn::scale(g, trace.log_probs[t], weights[m]));
      const double h = g.value(trace.entropies[t])[0];
      entropy_sum += h;
      weight_sq += weights[m] * weights[m];
      ++decisions;
      if (credit.entropy_coeff > 0.0) total = nn::add(g, total, nn::scale(g, trace.entropies[t], -credit.entropy_coeff));
    }
  }
  out.objective = total;
  if (decisions > 0) {
    out.entropy = entropy_sum / static_cast<double>(decisions);
    out.score_weight = weight_sq / static_cast<double>(decisions);
  }
  return out;
}

}  // namespace mctsnet::train
