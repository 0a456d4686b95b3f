#include "mctsnet/baseline/mcts.hpp"

#include <limits>

#include "mctsnet/sokoban/generator.hpp"

namespace mctsnet::baseline {

Action uct_select(const ScalarStats& stats, double c) {
  for (int a = 0; a < kNumActions; ++a) {
    if (stats.action_visits[static_cast<std::size_t>(a)] == 0) return sokoban::action_from_index(a);
  }
  const double log_n = std::log(static_cast<double>(std::max(stats.visits, 1)));
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < kNumActions; ++a) {
    const auto ai = static_cast<std::size_t>(a);
    const double score = stats.q[ai] + c * std::sqrt(log_n / stats.action_visits[ai]);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return sokoban::action_from_index(best);
}

Action puct_select(const ScalarStats& stats, std::span<const double> prior, double c_puct) {
  if (prior.size() != static_cast<std::size_t>(kNumActions)) throw UsageError("PUCT prior must have 4 entries");
  double total = 0.0;
  for (double p : prior) {
    if (!(p >= 0.0)) throw UsageError("PUCT prior has a negative or NaN entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw UsageError("PUCT prior does not sum to 1");
  const double sqrt_n = std::sqrt(static_cast<double>(stats.visits));
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < kNumActions; ++a) {
    const auto ai = static_cast<std::size_t>(a);
    const double score = stats.q[ai] + c_puct * prior[ai] * sqrt_n / (1.0 + stats.action_visits[ai]);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return sokoban::action_from_index(best);
}

Action most_visited(const ScalarStats& stats) {
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (stats.action_visits[static_cast<std::size_t>(a)] > stats.action_visits[static_cast<std::size_t>(best)]) best = a;
  }
  return sokoban::action_from_index(best);
}

Model<sokoban::GridState> sokoban_model(const sokoban::RewardScheme& rewards) {
  Model<sokoban::GridState> m;
  m.step = [rewards](const sokoban::GridState& s, Action a) {
    const auto r = sokoban::transition(s, a, rewards);
    return ModelStep<sokoban::GridState>{r.next, r.reward, r.terminal};
  };
  m.terminal = [](const sokoban::GridState& s) { return s.solved(); };
  return m;
}

double heuristic_value(const sokoban::GridState& s, const sokoban::RewardScheme& rewards, double gamma) {
  if (s.solved()) return 0.0;
  const int h = sokoban::box_distance_heuristic(s);
  return rewards.step_penalty * h + std::pow(gamma, h) * rewards.solve_bonus;
}

}  // namespace mctsnet::baseline
