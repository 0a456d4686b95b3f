#pragma once

#include <optional>
#include <random>
#include <vector>

#include "mctsnet/sokoban/grid_state.hpp"

namespace mctsnet::sokoban {

struct GeneratorOptions {
  // Fraction of interior cells carved to floor.
  double floor_fraction = 0.65;
  // Reverse moves applied after boxes are placed on their targets.
  int reverse_moves = 40;
  // Probability of pulling an adjacent box along when stepping away from it.
  double pull_probability = 0.7;
  int max_retries = 200;
};

// Solvable-by-construction level: a random connected room, boxes placed on
// targets, then scattered by reverse play (moves and pulls). Levels where a
// box still sits on its target or no pull happened are rejected and
// retried. Throws GenerationError when retries run out.
GridState generate_level(int width, int height, int n_boxes, std::mt19937_64& rng, const GeneratorOptions& options = {});

struct OracleResult {
  std::optional<std::vector<Action>> plan;
  std::size_t expanded = 0;
};

// A* over (boxes, agent) with unit move costs and the admissible heuristic
// sum over boxes of Manhattan distance to the nearest target. A box in a
// non-target corner prunes the node. Returns a minimum-length plan, or
// nothing once `max_nodes` expansions are exhausted or the space is.
OracleResult solve_oracle_detailed(const GridState& s, std::size_t max_nodes);
std::optional<std::vector<Action>> solve_oracle(const GridState& s, std::size_t max_nodes);

int box_distance_heuristic(const GridState& s);
bool has_corner_deadlock(const GridState& s);

}  // namespace mctsnet::sokoban
