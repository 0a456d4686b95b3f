#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "mctsnet/errors.hpp"
#include "mctsnet/sokoban/grid_state.hpp"

namespace mctsnet::baseline {

using sokoban::Action;
using sokoban::kNumActions;

struct ScalarStats {
  int visits = 0;  // N(s)
  std::array<int, kNumActions> action_visits{};  // N(s,a)
  std::array<double, kNumActions> q{};  // Q(s,a)
};

// argmax_a Q(s,a) + c*sqrt(ln N(s) / N(s,a)); untried actions score +inf and
// every tie goes to the lowest action index.
Action uct_select(const ScalarStats& stats, double c);

// argmax_a Q(s,a) + c_puct * prior(a) * sqrt(N(s)) / (1 + N(s,a)).
// The prior must be non-negative and sum to 1 within 1e-6 (UsageError).
Action puct_select(const ScalarStats& stats, std::span<const double> prior, double c_puct);

// Lowest-index argmax of visit counts.
Action most_visited(const ScalarStats& stats);

template <class State>
struct ModelStep {
  State next;
  double reward = 0.0;
  bool terminal = false;
};

template <class State>
struct Model {
  std::function<ModelStep<State>(const State&, Action)> step;
  std::function<bool(const State&)> terminal;
};

enum class SelectionRule { uct, puct };

struct SearchConfig {
  int simulations = 25;
  double gamma = 0.99;
  double c = 1.25;
  SelectionRule rule = SelectionRule::uct;
  // Keep every backed-up return per (node, action) for auditing Q.
  bool log_returns = false;
};

template <class State>
struct TreeNode {
  State state;
  bool terminal = false;
  ScalarStats stats;
  std::array<int, kNumActions> children{-1, -1, -1, -1};
  std::array<double, kNumActions> rewards{};
  std::array<std::vector<double>, kNumActions> returns;
};

template <class State>
class BaselineTree {
 public:
  BaselineTree() = default;
  BaselineTree(State root, bool terminal) { nodes_.push_back(TreeNode<State>{std::move(root), terminal, {}, {-1, -1, -1, -1}, {}, {}}); }

  int root() const { return 0; }
  std::size_t size() const { return nodes_.size(); }
  const TreeNode<State>& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  TreeNode<State>& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const TreeNode<State>& root_node() const { return nodes_.front(); }

  int add_child(int parent, Action a, const ModelStep<State>& step) {
    nodes_.push_back(TreeNode<State>{step.next, step.terminal, {}, {-1, -1, -1, -1}, {}, {}});
    const int id = static_cast<int>(nodes_.size()) - 1;
    auto& p = node(parent);
    p.children[static_cast<std::size_t>(sokoban::index(a))] = id;
    p.rewards[static_cast<std::size_t>(sokoban::index(a))] = step.reward;
    return id;
  }

  // Number of nodes reachable from `id` (including itself).
  std::size_t subtree_size(int id) const {
    std::size_t n = 0;
    std::vector<int> stack{id};
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      ++n;
      for (int c : node(cur).children)
        if (c >= 0) stack.push_back(c);
    }
    return n;
  }

  // Copies the subtree under `id` into a fresh arena with `id` as root.
  BaselineTree extract(int id) const {
    BaselineTree out;
    std::deque<std::pair<int, int>> queue{{id, -1}};
    while (!queue.empty()) {
      auto [src, dst_parent_slot] = queue.front();
      queue.pop_front();
      TreeNode<State> copy = node(src);
      const int dst = static_cast<int>(out.nodes_.size());
      out.nodes_.push_back(std::move(copy));
      if (dst_parent_slot >= 0) {
        const int parent = dst_parent_slot / kNumActions;
        out.nodes_[static_cast<std::size_t>(parent)].children[static_cast<std::size_t>(dst_parent_slot % kNumActions)] = dst;
      }
      for (int a = 0; a < kNumActions; ++a) {
        const int c = node(src).children[static_cast<std::size_t>(a)];
        if (c >= 0) queue.emplace_back(c, dst * kNumActions + a);
      }
    }
    return out;
  }

 private:
  std::vector<TreeNode<State>> nodes_;
};

template <class State>
struct SearchOutcome {
  Action action = Action::up;
  BaselineTree<State> tree;
  // Model transitions evaluated during the search.
  std::size_t model_calls = 0;
};

// Value-network MCTS. Each simulation descends by the selection rule until
// an unvisited node (or a terminal one), evaluates it with value_fn
// (terminal states are worth 0), and backs the discounted return
// R_t = sum_{t'>=t} gamma^{t'-t} r_t' + gamma^{L-t} V(s_L) into every
// (s_t, a_t) on the path as a running mean. The root action is the most
// visited; with no visits at all (M = 1) it falls back to a one-step
// lookahead maximising r(s,a) + gamma*V(T(s,a)).
//
// `prior_fn` is required for SelectionRule::puct.
template <class State>
SearchOutcome<State> run_search(BaselineTree<State> tree, const Model<State>& model,
                                const std::type_identity_t<std::function<double(const State&)>>& value_fn, const SearchConfig& config,
                                const std::type_identity_t<std::function<std::array<double, kNumActions>(const State&)>>& prior_fn = {}) {
  if (config.simulations < 1) throw UsageError("run_search needs at least one simulation");
  if (config.rule == SelectionRule::puct && !prior_fn) throw UsageError("PUCT search requires a prior function");
  SearchOutcome<State> out;

  struct PathStep {
    int node;
    Action action;
    double reward;
  };
  std::vector<PathStep> path;
  for (int sim = 0; sim < config.simulations; ++sim) {
    path.clear();
    int cur = tree.root();
    while (tree.node(cur).stats.visits > 0 && !tree.node(cur).terminal) {
      const auto& stats = tree.node(cur).stats;
      Action a;
      if (config.rule == SelectionRule::uct) {
        a = uct_select(stats, config.c);
      } else {
        const auto prior = prior_fn(tree.node(cur).state);
        a = puct_select(stats, prior, config.c);
      }
      const auto ai = static_cast<std::size_t>(sokoban::index(a));
      int child = tree.node(cur).children[ai];
      if (child < 0) {
        const auto step = model.step(tree.node(cur).state, a);
        ++out.model_calls;
        child = tree.add_child(cur, a, step);
      }
      path.push_back({cur, a, tree.node(cur).rewards[ai]});
      cur = child;
    }

    auto& leaf = tree.node(cur);
    const double value = leaf.terminal ? 0.0 : value_fn(leaf.state);
    if (leaf.stats.visits == 0) leaf.stats.visits = 1;

    double ret = value;
    for (std::size_t t = path.size(); t-- > 0;) {
      ret = path[t].reward + config.gamma * ret;
      auto& n = tree.node(path[t].node);
      const auto ai = static_cast<std::size_t>(sokoban::index(path[t].action));
      n.stats.q[ai] += (ret - n.stats.q[ai]) / static_cast<double>(n.stats.action_visits[ai] + 1);
      n.stats.visits += 1;
      n.stats.action_visits[ai] += 1;
      if (config.log_returns) n.returns[ai].push_back(ret);
    }
  }

  const auto& root = tree.root_node();
  bool any_visits = false;
  for (int v : root.stats.action_visits) any_visits = any_visits || v > 0;
  if (any_visits) {
    out.action = most_visited(root.stats);
  } else {
    double best = -INFINITY;
    for (Action a : sokoban::kAllActions) {
      if (root.terminal) break;
      const auto step = model.step(root.state, a);
      ++out.model_calls;
      const double v = step.reward + config.gamma * (step.terminal ? 0.0 : value_fn(step.next));
      if (v > best) {
        best = v;
        out.action = a;
      }
    }
  }
  out.tree = std::move(tree);
  return out;
}

// Makes the child under `a` the new root, keeping its statistics. When the
// child was never expanded the result is a fresh single-node tree.
template <class State>
BaselineTree<State> reuse_subtree(const BaselineTree<State>& tree, Action a, const Model<State>& model) {
  const int child = tree.root_node().children[static_cast<std::size_t>(sokoban::index(a))];
  if (child >= 0) return tree.extract(child);
  const auto step = model.step(tree.root_node().state, a);
  return BaselineTree<State>(step.next, step.terminal);
}

// Sokoban model with the given reward scheme.
Model<sokoban::GridState> sokoban_model(const sokoban::RewardScheme& rewards);

// Value estimate for Sokoban leaves built from the box-distance lower bound:
// step_penalty * h + gamma^h * solve_bonus, where h counts the pushes still
// needed at minimum.
double heuristic_value(const sokoban::GridState& s, const sokoban::RewardScheme& rewards, double gamma);

}  // namespace mctsnet::baseline
