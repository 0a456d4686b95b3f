#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "mctsnet/baseline/mcts.hpp"
#include "mctsnet/sokoban/generator.hpp"

using namespace mctsnet;
using namespace mctsnet::baseline;
using sokoban::action_from_index;

namespace {

// Depth-limited toy tree: state = (depth, path code). Rewards come from a
// table indexed by the path; depth `horizon` is terminal.
struct ToyState {
  int depth = 0;
  int code = 0;
};

struct ToyTree {
  int horizon = 2;
  std::vector<double> level1;  // 4
  std::vector<double> level2;  // 16

  Model<ToyState> model() const {
    Model<ToyState> m;
    m.step = [this](const ToyState& s, Action a) {
      const int ai = sokoban::index(a);
      ToyState next{s.depth + 1, s.code * 4 + ai};
      const double r = s.depth == 0 ? level1[static_cast<std::size_t>(ai)] : level2[static_cast<std::size_t>(next.code)];
      return ModelStep<ToyState>{next, r, next.depth >= horizon};
    };
    m.terminal = [this](const ToyState& s) { return s.depth >= horizon; };
    return m;
  }

  // Exact optimal value of each root action (gamma = 1).
  std::array<double, 4> root_values() const {
    std::array<double, 4> v{};
    for (int a = 0; a < 4; ++a) {
      double best = -INFINITY;
      if (horizon == 1) best = 0.0;
      else
        for (int b = 0; b < 4; ++b) best = std::max(best, level2[static_cast<std::size_t>(a * 4 + b)]);
      v[static_cast<std::size_t>(a)] = level1[static_cast<std::size_t>(a)] + best;
    }
    return v;
  }
};

ToyTree random_tree(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ToyTree t;
  t.level1.resize(4);
  t.level2.resize(16);
  for (auto& r : t.level1) r = u(rng);
  for (auto& r : t.level2) r = u(rng);
  return t;
}

int enumerate_uct(const ScalarStats& s, double c) {
  int best = -1;
  double best_score = -INFINITY;
  for (int a = 0; a < 4; ++a) {
    const double score = s.action_visits[a] == 0 ? INFINITY : s.q[a] + c * std::sqrt(std::log(s.visits) / s.action_visits[a]);
    if (best < 0 || score > best_score) best = a, best_score = score;
  }
  return best;
}

int enumerate_puct(const ScalarStats& s, const std::array<double, 4>& prior, double c) {
  int best = -1;
  double best_score = -INFINITY;
  for (int a = 0; a < 4; ++a) {
    const double score = s.q[a] + c * prior[a] * std::sqrt(static_cast<double>(s.visits)) / (1.0 + s.action_visits[a]);
    if (best < 0 || score > best_score) best = a, best_score = score;
  }
  return best;
}

ScalarStats random_stats(std::mt19937_64& rng, bool allow_zero) {
  std::uniform_int_distribution<int> n(allow_zero ? 0 : 1, 20);
  std::uniform_real_distribution<double> q(-1.0, 1.0);
  ScalarStats s;
  for (int a = 0; a < 4; ++a) {
    s.action_visits[a] = n(rng);
    s.q[a] = q(rng);
  }
  s.visits = 1 + std::accumulate(s.action_visits.begin(), s.action_visits.end(), 0);
  return s;
}

}  // namespace

TEST_CASE("uct_select") {
  ScalarStats s;
  s.visits = 1;
  CHECK(uct_select(s, 1.0) == Action::up);

  s.q = {0.5, 0.5, 0.5, 0.5};
  s.action_visits = {4, 1, 1, 1};
  s.visits = static_cast<int>(std::exp(7.0));
  CHECK(uct_select(s, 1.0) == Action::down);

  s.action_visits = {4, 1, 0, 1};
  CHECK(uct_select(s, 1.0) == Action::left);

  std::mt19937_64 rng(12);
  for (int i = 0; i < 2000; ++i) {
    const auto st = random_stats(rng, true);
    CHECK(sokoban::index(uct_select(st, 1.25)) == enumerate_uct(st, 1.25));
  }
}

TEST_CASE("puct_select") {
  ScalarStats s;
  s.visits = 1;
  const std::array<double, 4> prior{0.1, 0.2, 0.6, 0.1};
  CHECK(puct_select(s, prior, 1.0) == Action::left);

  const std::array<double, 4> uniform{0.25, 0.25, 0.25, 0.25};
  s.action_visits = {3, 1, 5, 2};
  s.visits = 12;
  CHECK(puct_select(s, uniform, 1.0) == Action::down);

  const std::array<double, 4> bad{0.5, 0.5, 0.5, 0.0};
  CHECK_THROWS_AS(puct_select(s, bad, 1.0), UsageError);
  const std::array<double, 3> short_prior{0.5, 0.25, 0.25};
  CHECK_THROWS_AS(puct_select(s, short_prior, 1.0), UsageError);

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const auto st = random_stats(rng, true);
    std::array<double, 4> p{};
    for (auto& v : p) v = u(rng);
    const double total = p[0] + p[1] + p[2] + p[3];
    for (auto& v : p) v /= total;
    CHECK(sokoban::index(puct_select(st, p, 1.5)) == enumerate_puct(st, p, 1.5));
  }
}

TEST_CASE("run_search on toy trees") {
  const auto zero = [](const ToyState&) { return 0.0; };

  SUBCASE("M = 1 falls back to one-step lookahead") {
    ToyTree t;
    t.horizon = 1;
    t.level1 = {0.1, 0.7, 0.3, 0.2};
    SearchConfig cfg;
    cfg.simulations = 1;
    const auto out = run_search(BaselineTree<ToyState>({}, false), t.model(), zero, cfg);
    CHECK(out.tree.size() == 1);
    CHECK(out.tree.root_node().stats.visits == 1);
    for (int v : out.tree.root_node().stats.action_visits) CHECK(v == 0);
    CHECK(out.action == Action::down);
  }
  SUBCASE("two-armed bandit") {
    ToyTree t;
    t.horizon = 1;
    t.level1 = {0.0, 1.0, 0.0, 0.0};
    SearchConfig cfg;
    cfg.simulations = 100;
    const auto out = run_search(BaselineTree<ToyState>({}, false), t.model(), zero, cfg);
    CHECK(out.action == Action::down);
  }
  SUBCASE("first sample sets Q to the return") {
    ToyTree t;
    t.horizon = 1;
    t.level1 = {0.0, 0.0, 0.0, 0.0};
    SearchConfig cfg;
    cfg.simulations = 2;
    cfg.gamma = 0.5;
    auto model = t.model();
    t.level1[0] = 0.3;
    const auto out = run_search(BaselineTree<ToyState>({}, false), model, zero, cfg);
    CHECK(out.tree.root_node().stats.q[0] == 0.3);
    CHECK(out.tree.root_node().stats.action_visits[0] == 1);
  }
  SUBCASE("M < 1 is rejected") {
    ToyTree t;
    SearchConfig cfg;
    cfg.simulations = 0;
    CHECK_THROWS_AS(run_search(BaselineTree<ToyState>({}, false), t.model(), zero, cfg), UsageError);
  }
  SUBCASE("visit and mean invariants") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      ToyTree t = random_tree(rng);
      t.horizon = 3;
      t.level2.resize(16);
      Model<ToyState> base = t.model();
      Model<ToyState> m = base;
      std::uniform_real_distribution<double> u(-1, 1);
      m.step = [&](const ToyState& s, Action a) {
        if (s.depth < 2) return base.step(s, a);
        ToyState next{s.depth + 1, s.code * 4 + sokoban::index(a)};
        return ModelStep<ToyState>{next, 0.01 * (next.code % 7), next.depth >= 3};
      };
      m.terminal = [](const ToyState& s) { return s.depth >= 3; };
      SearchConfig cfg;
      cfg.simulations = 1 + trial * 5;
      cfg.gamma = 0.9;
      cfg.log_returns = true;
      auto value = [](const ToyState& s) { return 0.05 * s.code; };

      // N(s) along the path grows by one per simulation.
      BaselineTree<ToyState> tree({}, false);
      for (int sim = 0; sim < cfg.simulations; ++sim) {
        SearchConfig one = cfg;
        one.simulations = 1;
        const int before = tree.root_node().stats.visits;
        tree = run_search(std::move(tree), m, value, one).tree;
        CHECK(tree.root_node().stats.visits == before + 1);
      }
      for (std::size_t id = 0; id < tree.size(); ++id) {
        const auto& n = tree.node(static_cast<int>(id));
        if (n.terminal) {
          for (int c : n.children) CHECK(c == -1);
          continue;
        }
        if (n.stats.visits == 0) continue;
        CHECK(n.stats.visits == 1 + std::accumulate(n.stats.action_visits.begin(), n.stats.action_visits.end(), 0));
        for (int a = 0; a < 4; ++a) {
          const auto& log = n.returns[a];
          CHECK(static_cast<int>(log.size()) == n.stats.action_visits[a]);
          if (log.empty()) continue;
          const double mean = std::accumulate(log.begin(), log.end(), 0.0) / static_cast<double>(log.size());
          CHECK(std::abs(n.stats.q[a] - mean) <= 1e-12);
        }
      }
    }
  }
  SUBCASE("greedy search with exact values picks the dominant arm") {
    // With c = 0 and V exact, the optimal arm is recovered whenever its
    // worst continuation beats every other arm's best.
    std::mt19937_64 rng(31);
    int checked = 0;
    while (checked < 200) {
      ToyTree t = random_tree(rng);
      const auto values = t.root_values();
      const int best = static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
      bool dominant = true;
      for (int a = 0; a < 4 && dominant; ++a) {
        if (a == best) continue;
        for (int b = 0; b < 4; ++b)
          if (t.level1[best] + t.level2[best * 4 + b] <= values[a]) dominant = false;
      }
      if (!dominant) continue;
      ++checked;
      auto exact = [&](const ToyState& s) {
        if (s.depth != 1) return 0.0;
        double v = -INFINITY;
        for (int b = 0; b < 4; ++b) v = std::max(v, t.level2[static_cast<std::size_t>(s.code * 4 + b)]);
        return v;
      };
      for (int m = 8; m <= 32; m += 8) {
        SearchConfig cfg;
        cfg.simulations = m;
        cfg.c = 0.0;
        cfg.gamma = 1.0;
        CHECK(sokoban::index(run_search(BaselineTree<ToyState>({}, false), t.model(), exact, cfg).action) == best);
      }
    }
  }
  SUBCASE("PUCT search requires a prior") {
    ToyTree t;
    SearchConfig cfg;
    cfg.rule = SelectionRule::puct;
    CHECK_THROWS_AS(run_search(BaselineTree<ToyState>({}, false), t.model(), zero, cfg), UsageError);
  }
}

TEST_CASE("reuse_subtree") {
  std::mt19937_64 rng(5);
  ToyTree t = random_tree(rng);
  const auto zero = [](const ToyState&) { return 0.0; };
  SearchConfig cfg;
  cfg.simulations = 30;
  cfg.gamma = 1.0;
  const auto out = run_search(BaselineTree<ToyState>({}, false), t.model(), zero, cfg);
  const auto& root = out.tree.root_node();
  for (int a = 0; a < 4; ++a) {
    const int child = root.children[a];
    REQUIRE(child >= 0);
    const auto reused = reuse_subtree(out.tree, action_from_index(a), t.model());
    CHECK(reused.size() == out.tree.subtree_size(child));
    const auto& old_child = out.tree.node(child);
    CHECK(reused.root_node().stats.visits == old_child.stats.visits);
    CHECK(reused.root_node().stats.q == old_child.stats.q);
    CHECK(reused.root_node().stats.action_visits == old_child.stats.action_visits);
    CHECK(reused.root_node().state.code == old_child.state.code);
  }

  SearchConfig small;
  small.simulations = 1;
  const auto fresh_out = run_search(BaselineTree<ToyState>({}, false), t.model(), zero, small);
  auto fresh = reuse_subtree(fresh_out.tree, Action::right, t.model());
  CHECK(fresh.size() == 1);
  CHECK(fresh.root_node().stats.visits == 0);
  CHECK(fresh.root_node().state.code == 3);
  fresh = run_search(std::move(fresh), t.model(), zero, small).tree;
  CHECK(fresh.root_node().stats.visits == 1);
}

TEST_CASE("sokoban model and heuristic value") {
  const auto s = sokoban::parse_xsb(
      "######\n"
      "#@$. #\n"
      "######\n");
  const sokoban::RewardScheme rs;
  const auto m = sokoban_model(rs);
  SearchConfig cfg;
  cfg.simulations = 20;
  auto v = [&](const sokoban::GridState& st) { return heuristic_value(st, rs, cfg.gamma); };
  const auto out = run_search(BaselineTree<sokoban::GridState>(s, false), m, v, cfg);
  CHECK(out.action == Action::right);
  CHECK(heuristic_value(s, rs, 0.99) == doctest::Approx(-0.1 + 0.99 * 10));
}
