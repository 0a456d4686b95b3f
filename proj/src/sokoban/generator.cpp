#include "mctsnet/sokoban/generator.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <queue>
#include <unordered_map>

#include "mctsnet/errors.hpp"

namespace mctsnet::sokoban {

namespace {

std::vector<Cell> cells_of(const GridState& s, const CellSet& set) {
  std::vector<Cell> out;
  for (int r = 0; r < s.height(); ++r)
    for (int c = 0; c < s.width(); ++c)
      if (set.test(s.cell_index({r, c}))) out.push_back({r, c});
  return out;
}

std::optional<GridState> try_generate(int width, int height, int n_boxes, std::mt19937_64& rng,
                                      const GeneratorOptions& options) {
  const int interior = (width - 2) * (height - 2);
  const int wanted = std::max(n_boxes * 3 + 2, static_cast<int>(options.floor_fraction * interior));
  auto idx = [width](int r, int c) { return static_cast<std::size_t>(r * width + c); };

  CellSet floor;
  std::uniform_int_distribution<int> row_dist(1, height - 2);
  std::uniform_int_distribution<int> col_dist(1, width - 2);
  std::uniform_int_distribution<int> dir_dist(0, kNumActions - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Random walk carving keeps the room connected.
  Cell cur{row_dist(rng), col_dist(rng)};
  floor.set(idx(cur.row, cur.col));
  Action dir = action_from_index(dir_dist(rng));
  for (int guard = 0; static_cast<int>(floor.count()) < wanted && guard < 100000; ++guard) {
    if (unit(rng) < 0.35) dir = action_from_index(dir_dist(rng));
    const Cell next = step_cell(cur, dir);
    if (next.row < 1 || next.col < 1 || next.row > height - 2 || next.col > width - 2) {
      dir = action_from_index(dir_dist(rng));
      continue;
    }
    cur = next;
    floor.set(idx(cur.row, cur.col));
  }

  CellSet walls;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      if (!floor.test(idx(r, c))) walls.set(idx(r, c));

  std::vector<Cell> floor_cells;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      if (floor.test(idx(r, c))) floor_cells.push_back({r, c});
  if (static_cast<int>(floor_cells.size()) < n_boxes + 1) return std::nullopt;
  std::shuffle(floor_cells.begin(), floor_cells.end(), rng);

  CellSet targets;
  for (int b = 0; b < n_boxes; ++b) targets.set(idx(floor_cells[static_cast<std::size_t>(b)].row, floor_cells[static_cast<std::size_t>(b)].col));
  CellSet boxes = targets;
  Cell agent = floor_cells[static_cast<std::size_t>(n_boxes)];

  auto free_cell = [&](Cell c) {
    return c.row >= 0 && c.col >= 0 && c.row < height && c.col < width && floor.test(idx(c.row, c.col)) &&
           !boxes.test(idx(c.row, c.col));
  };

  int pulls = 0;
  for (int step = 0; step < options.reverse_moves; ++step) {
    const Action a = action_from_index(dir_dist(rng));
    const Cell dest = step_cell(agent, a);
    if (!free_cell(dest)) continue;
    // The cell behind the agent, opposite to the move direction.
    const Cell behind{2 * agent.row - dest.row, 2 * agent.col - dest.col};
    const bool box_behind = behind.row >= 0 && behind.col >= 0 && behind.row < height && behind.col < width &&
                            boxes.test(idx(behind.row, behind.col));
    if (box_behind && unit(rng) < options.pull_probability) {
      boxes.reset(idx(behind.row, behind.col));
      boxes.set(idx(agent.row, agent.col));
      ++pulls;
    }
    agent = dest;
  }
  if (pulls == 0 || (boxes & targets).any()) return std::nullopt;
  return GridState::create(width, height, walls, targets, boxes, agent);
}

struct SearchKey {
  CellSet boxes;
  int agent;
  bool operator==(const SearchKey&) const = default;
};

struct SearchKeyHash {
  std::size_t operator()(const SearchKey& k) const noexcept {
    return std::hash<CellSet>{}(k.boxes) ^ (static_cast<std::size_t>(k.agent) * 0x9e3779b97f4a7c15ULL);
  }
};

}  // namespace

GridState generate_level(int width, int height, int n_boxes, std::mt19937_64& rng, const GeneratorOptions& options) {
  if (width < 4 || height < 4 || n_boxes < 1 || width > kMaxSide || height > kMaxSide) {
    throw UsageError("unsupported level size " + std::to_string(width) + "x" + std::to_string(height) + " with " +
                     std::to_string(n_boxes) + " boxes");
  }
  const int interior = (width - 2) * (height - 2);
  if (interior < n_boxes * 3 + 2) throw UsageError("board too small for the requested box count");
  for (int attempt = 0; attempt < options.max_retries; ++attempt) {
    if (auto level = try_generate(width, height, n_boxes, rng, options)) return *level;
  }
  throw GenerationError("level generation failed after " + std::to_string(options.max_retries) + " retries");
}

int box_distance_heuristic(const GridState& s) {
  const auto targets = cells_of(s, s.targets());
  int total = 0;
  for (const Cell& b : cells_of(s, s.boxes())) {
    int best = std::numeric_limits<int>::max();
    for (const Cell& t : targets) best = std::min(best, std::abs(b.row - t.row) + std::abs(b.col - t.col));
    total += best;
  }
  return total;
}

bool has_corner_deadlock(const GridState& s) {
  for (const Cell& b : cells_of(s, s.boxes())) {
    if (s.target(b)) continue;
    const bool up = s.wall(step_cell(b, Action::up));
    const bool down = s.wall(step_cell(b, Action::down));
    const bool left = s.wall(step_cell(b, Action::left));
    const bool right = s.wall(step_cell(b, Action::right));
    if ((up || down) && (left || right)) return true;
  }
  return false;
}

OracleResult solve_oracle_detailed(const GridState& s, std::size_t max_nodes) {
  OracleResult result;
  if (s.solved()) {
    result.plan = std::vector<Action>{};
    return result;
  }
  struct Record {
    GridState state;
    int g;
    std::int64_t parent;
    Action via;
  };
  struct QueueItem {
    int f;
    int h;
    std::uint64_t order;
    std::size_t record;
    bool operator>(const QueueItem& o) const {
      if (f != o.f) return f > o.f;
      if (h != o.h) return h > o.h;
      return order > o.order;
    }
  };

  std::vector<Record> records;
  std::unordered_map<SearchKey, int, SearchKeyHash> best_g;
  std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> open;
  std::uint64_t order = 0;

  auto key_of = [](const GridState& st) { return SearchKey{st.boxes(), static_cast<int>(st.cell_index(st.agent()))}; };
  records.push_back({s, 0, -1, Action::up});
  best_g[key_of(s)] = 0;
  const int h0 = box_distance_heuristic(s);
  open.push({h0, h0, order++, 0});

  while (!open.empty()) {
    const QueueItem item = open.top();
    open.pop();
    const Record rec = records[item.record];
    if (best_g[key_of(rec.state)] < rec.g) continue;
    if (rec.state.solved()) {
      std::vector<Action> plan;
      for (auto i = static_cast<std::int64_t>(item.record); records[static_cast<std::size_t>(i)].parent >= 0;
           i = records[static_cast<std::size_t>(i)].parent) {
        plan.push_back(records[static_cast<std::size_t>(i)].via);
      }
      std::reverse(plan.begin(), plan.end());
      result.plan = std::move(plan);
      return result;
    }
    if (result.expanded >= max_nodes) return result;
    ++result.expanded;
    for (Action a : kAllActions) {
      const StepResult step = transition(rec.state, a);
      if (step.next == rec.state) continue;
      if (!step.terminal && has_corner_deadlock(step.next)) continue;
      const SearchKey key = key_of(step.next);
      const int g = rec.g + 1;
      auto it = best_g.find(key);
      if (it != best_g.end() && it->second <= g) continue;
      best_g[key] = g;
      const int h = box_distance_heuristic(step.next);
      records.push_back({step.next, g, static_cast<std::int64_t>(item.record), a});
      open.push({g + h, h, order++, records.size() - 1});
    }
  }
  return result;
}

std::optional<std::vector<Action>> solve_oracle(const GridState& s, std::size_t max_nodes) {
  return solve_oracle_detailed(s, max_nodes).plan;
}

}  // namespace mctsnet::sokoban
