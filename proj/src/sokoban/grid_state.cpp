#include "mctsnet/sokoban/grid_state.hpp"

#include <sstream>
#include <vector>

#include "mctsnet/errors.hpp"

namespace mctsnet::sokoban {

Action action_from_index(int i) {
  if (i < 0 || i >= kNumActions) throw UsageError("action index out of range: " + std::to_string(i));
  return static_cast<Action>(i);
}

const char* action_name(Action a) {
  switch (a) {
    case Action::up: return "up";
    case Action::down: return "down";
    case Action::left: return "left";
    case Action::right: return "right";
  }
  return "?";
}

Cell step_cell(Cell c, Action a) {
  switch (a) {
    case Action::up: return {c.row - 1, c.col};
    case Action::down: return {c.row + 1, c.col};
    case Action::left: return {c.row, c.col - 1};
    case Action::right: return {c.row, c.col + 1};
  }
  return c;
}

GridState GridState::create(int width, int height, const CellSet& walls, const CellSet& targets, const CellSet& boxes,
                            Cell agent) {
  if (width <= 0 || height <= 0 || width > kMaxSide || height > kMaxSide) {
    throw UsageError("board size out of range: " + std::to_string(width) + "x" + std::to_string(height));
  }
  const auto cells = static_cast<std::size_t>(width * height);
  for (std::size_t i = cells; i < kMaxCells; ++i) {
    if (walls.test(i) || targets.test(i) || boxes.test(i)) throw UsageError("object outside the board");
  }
  if (boxes.count() != targets.count()) {
    throw UsageError("box count " + std::to_string(boxes.count()) + " differs from target count " +
                     std::to_string(targets.count()));
  }
  if ((walls & boxes).any() || (walls & targets).any()) throw UsageError("box or target on a wall");
  GridState s;
  s.width_ = width;
  s.height_ = height;
  s.walls_ = walls;
  s.targets_ = targets;
  s.boxes_ = boxes;
  s.agent_ = agent;
  if (!s.in_bounds(agent)) throw UsageError("agent out of bounds");
  if (s.walls_.test(s.cell_index(agent)) || s.boxes_.test(s.cell_index(agent))) {
    throw UsageError("agent on a wall or box");
  }
  return s;
}

GridState GridState::with(const CellSet& boxes, Cell agent) const {
  GridState s = *this;
  s.boxes_ = boxes;
  s.agent_ = agent;
  return s;
}

std::size_t hash_value(const GridState& s) {
  std::size_t h = std::hash<CellSet>{}(s.boxes());
  auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
  mix(std::hash<CellSet>{}(s.walls()));
  mix(std::hash<CellSet>{}(s.targets()));
  mix(static_cast<std::size_t>(s.agent().row * kMaxSide + s.agent().col));
  mix(static_cast<std::size_t>(s.width() * kMaxSide + s.height()));
  return h;
}

StepResult transition(const GridState& s, Action a, const RewardScheme& rewards) {
  if (s.width() == 0) throw UsageError("transition on an empty state");
  if (s.solved()) throw UsageError("transition from a terminal state");
  StepResult result{s, rewards.step_penalty, false};
  const Cell next = step_cell(s.agent(), a);
  if (s.wall(next)) return result;
  if (!s.box(next)) {
    result.next = s.with(s.boxes(), next);
    return result;
  }
  const Cell beyond = step_cell(next, a);
  if (s.wall(beyond) || s.box(beyond)) return result;

  CellSet boxes = s.boxes();
  boxes.reset(s.cell_index(next));
  boxes.set(s.cell_index(beyond));
  result.next = s.with(boxes, next);
  if (s.target(beyond) && !s.target(next)) result.reward += rewards.box_on;
  if (!s.target(beyond) && s.target(next)) result.reward += rewards.box_off;
  if (result.next.solved()) {
    result.reward += rewards.solve_bonus;
    result.terminal = true;
  }
  return result;
}

nn::Tensor encode(const GridState& s) {
  const auto h = static_cast<std::size_t>(s.height());
  const auto w = static_cast<std::size_t>(s.width());
  nn::Tensor planes({4, h, w}, 0.0);
  for (int r = 0; r < s.height(); ++r) {
    for (int c = 0; c < s.width(); ++c) {
      const Cell cell{r, c};
      const std::size_t off = static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c);
      if (s.wall(cell)) planes[0 * h * w + off] = 1.0;
      if (s.agent() == cell) planes[1 * h * w + off] = 1.0;
      if (s.box(cell)) planes[2 * h * w + off] = 1.0;
      if (s.target(cell)) planes[3 * h * w + off] = 1.0;
    }
  }
  return planes;
}

GridState decode(const nn::Tensor& planes) {
  if (planes.rank() != 3 || planes.dim(0) != 4) {
    throw UsageError("decode expects [4xHxW] planes, got " + nn::shape_string(planes.shape()));
  }
  const int h = static_cast<int>(planes.dim(1));
  const int w = static_cast<int>(planes.dim(2));
  if (h > kMaxSide || w > kMaxSide) throw UsageError("board too large to decode");
  CellSet walls, boxes, targets;
  std::optional<Cell> agent;
  const auto hw = static_cast<std::size_t>(h * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto off = static_cast<std::size_t>(r * w + c);
      auto bit = [&](std::size_t plane) {
        const double v = planes[plane * hw + off];
        if (v != 0.0 && v != 1.0) throw UsageError("non-binary plane value");
        return v == 1.0;
      };
      if (bit(0)) walls.set(off);
      if (bit(2)) boxes.set(off);
      if (bit(3)) targets.set(off);
      if (bit(1)) {
        if (agent) throw UsageError("more than one agent in planes");
        agent = Cell{r, c};
      }
    }
  }
  if (!agent) throw UsageError("no agent in planes");
  return GridState::create(w, h, walls, targets, boxes, *agent);
}

GridState parse_xsb(std::string_view text) {
  std::vector<std::string> rows;
  std::string line;
  std::istringstream in{std::string(text)};
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    rows.push_back(line);
  }
  while (!rows.empty() && rows.back().find_first_not_of(' ') == std::string::npos) rows.pop_back();
  if (rows.empty()) throw UsageError("empty XSB level");
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.size());
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(width);
  if (h > kMaxSide || w > kMaxSide) throw UsageError("XSB level larger than 16x16");

  CellSet walls, boxes, targets;
  std::optional<Cell> agent;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      const char ch = static_cast<std::size_t>(c) < row.size() ? row[static_cast<std::size_t>(c)] : ' ';
      const auto off = static_cast<std::size_t>(r * w + c);
      switch (ch) {
        case '#': walls.set(off); break;
        case '$': boxes.set(off); break;
        case '.': targets.set(off); break;
        case '*': boxes.set(off); targets.set(off); break;
        case '@':
        case '+':
          if (agent) throw UsageError("XSB level has more than one agent");
          agent = Cell{r, c};
          if (ch == '+') targets.set(off);
          break;
        case ' ':
        case '-':
        case '_': break;
        default: throw UsageError(std::string("unknown XSB character '") + ch + "'");
      }
    }
  }
  if (!agent) throw UsageError("XSB level has no agent");
  return GridState::create(w, h, walls, targets, boxes, *agent);
}

std::string to_xsb(const GridState& s) {
  std::string out;
  for (int r = 0; r < s.height(); ++r) {
    for (int c = 0; c < s.width(); ++c) {
      const Cell cell{r, c};
      char ch = ' ';
      if (s.wall(cell)) ch = '#';
      else if (s.agent() == cell) ch = s.target(cell) ? '+' : '@';
      else if (s.box(cell)) ch = s.target(cell) ? '*' : '$';
      else if (s.target(cell)) ch = '.';
      out += ch;
    }
    out += '\n';
  }
  return out;
}

}  // namespace mctsnet::sokoban
