#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "mctsnet/nn/tensor.hpp"

namespace mctsnet::sokoban {

inline constexpr int kMaxSide = 16;
inline constexpr std::size_t kMaxCells = kMaxSide * kMaxSide;
inline constexpr int kNumActions = 4;

using CellSet = std::bitset<kMaxCells>;

enum class Action : std::uint8_t { up = 0, down = 1, left = 2, right = 3 };

inline constexpr std::array<Action, kNumActions> kAllActions{Action::up, Action::down, Action::left, Action::right};

inline int index(Action a) { return static_cast<int>(a); }
// Throws UsageError outside 0..3.
Action action_from_index(int i);
const char* action_name(Action a);

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

Cell step_cell(Cell c, Action a);

// Immutable Sokoban board. Construction validates the invariants: matching
// box/target counts, in-bounds objects, agent off walls and boxes.
class GridState {
 public:
  GridState() = default;
  static GridState create(int width, int height, const CellSet& walls, const CellSet& targets, const CellSet& boxes,
                          Cell agent);

  int width() const { return width_; }
  int height() const { return height_; }
  Cell agent() const { return agent_; }
  const CellSet& walls() const { return walls_; }
  const CellSet& targets() const { return targets_; }
  const CellSet& boxes() const { return boxes_; }

  std::size_t cell_index(Cell c) const { return static_cast<std::size_t>(c.row * width_ + c.col); }
  bool in_bounds(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < height_ && c.col < width_; }
  bool wall(Cell c) const { return !in_bounds(c) || walls_.test(cell_index(c)); }
  bool box(Cell c) const { return in_bounds(c) && boxes_.test(cell_index(c)); }
  bool target(Cell c) const { return in_bounds(c) && targets_.test(cell_index(c)); }

  std::size_t box_count() const { return boxes_.count(); }
  std::size_t boxes_on_targets() const { return (boxes_ & targets_).count(); }
  bool solved() const { return boxes_ == targets_; }

  GridState with(const CellSet& boxes, Cell agent) const;

  bool operator==(const GridState&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  CellSet walls_;
  CellSet targets_;
  CellSet boxes_;
  Cell agent_;
};

std::size_t hash_value(const GridState& s);

struct RewardScheme {
  double step_penalty = -0.1;
  double box_on = 1.0;
  double box_off = -1.0;
  double solve_bonus = 10.0;
};

struct StepResult {
  GridState next;
  double reward = 0.0;
  bool terminal = false;
};

// One move under standard rules. Blocked moves return the same state with
// reward = step_penalty. The input must not be solved (UsageError).
StepResult transition(const GridState& s, Action a, const RewardScheme& rewards = {});

// Four binary planes [4×H×W] in order (wall, agent, box, target).
nn::Tensor encode(const GridState& s);
// Inverse of encode; throws UsageError on malformed planes.
GridState decode(const nn::Tensor& planes);

// XSB text: # wall, @ agent, + agent on target, $ box, * box on target,
// . target, space/-/_ floor. Rows separated by '\n'.
GridState parse_xsb(std::string_view text);
std::string to_xsb(const GridState& s);

}  // namespace mctsnet::sokoban

template <>
struct std::hash<mctsnet::sokoban::GridState> {
  std::size_t operator()(const mctsnet::sokoban::GridState& s) const noexcept { return mctsnet::sokoban::hash_value(s); }
};
