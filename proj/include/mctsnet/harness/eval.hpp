#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mctsnet/baseline/mcts.hpp"
#include "mctsnet/net/search.hpp"
#include "mctsnet/train/dataset.hpp"

namespace mctsnet::harness {

using sokoban::Action;
using sokoban::GridState;

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96);

struct EvalResult {
  double success_ratio = 0.0;
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double mean_steps_to_solve = 0.0;  // over solved episodes
  Interval interval;
  double half_width = 0.0;
};

// An acting policy. `reset` is called with the first state of every episode.
struct Agent {
  std::function<void(const GridState&)> reset;
  std::function<Action(const GridState&)> act;
};

inline constexpr int kStepCap = 100;

// Plays each level until solved or `max_steps` real steps; a solve on the
// last allowed step counts.
EvalResult evaluate_agent(const Agent& agent, const std::vector<GridState>& levels, int max_steps = kStepCap,
                          const sokoban::RewardScheme& rewards = {});

// Level files: XSB grids separated by blank lines, ';' lines are comments.
void write_levels(std::ostream& out, const std::vector<GridState>& levels);
std::vector<GridState> read_levels(std::istream& in);
std::vector<GridState> load_levels(const std::string& path);

std::vector<GridState> make_levels(std::size_t n, const train::BoardSpec& board, std::uint64_t seed);

// Runs an M-simulation search per real step, acts greedily on the readout and
// carries the subtree under the chosen action over to the next step.
Agent mctsnet_agent(const nn::ParamStore& store, const net::SubnetConfig& config, const net::EnvModel& model,
                    int simulations, std::uint64_t seed);
// Value-network MCTS with the box-distance value estimate; PUCT when a prior
// store is given.
Agent uct_agent(int simulations, const baseline::SearchConfig& search, const sokoban::RewardScheme& rewards = {});
Agent puct_agent(const nn::ParamStore& prior, const net::SubnetConfig& config, int simulations,
                 const baseline::SearchConfig& search, const sokoban::RewardScheme& rewards = {});
Agent random_agent(std::uint64_t seed);
// Follows the oracle plan, replanning whenever the state leaves it.
Agent oracle_agent(std::size_t budget = 200000);

}  // namespace mctsnet::harness
