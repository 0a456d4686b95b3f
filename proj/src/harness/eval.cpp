#include "mctsnet/harness/eval.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>

#include "mctsnet/errors.hpp"
#include "mctsnet/nn/ops.hpp"

namespace mctsnet::harness {

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

EvalResult evaluate_agent(const Agent& agent, const std::vector<GridState>& levels, int max_steps,
                          const sokoban::RewardScheme& rewards) {
  EvalResult r;
  r.episodes = levels.size();
  double steps_sum = 0.0;
  for (const auto& level : levels) {
    GridState s = level;
    if (agent.reset) agent.reset(s);
    for (int t = 1; t <= max_steps && !s.solved(); ++t) {
      s = sokoban::transition(s, agent.act(s), rewards).next;
      if (s.solved()) {
        ++r.successes;
        steps_sum += t;
      }
    }
  }
  if (r.episodes > 0) r.success_ratio = static_cast<double>(r.successes) / static_cast<double>(r.episodes);
  if (r.successes > 0) r.mean_steps_to_solve = steps_sum / static_cast<double>(r.successes);
  r.interval = wilson_interval(r.successes, r.episodes);
  r.half_width = (r.interval.high - r.interval.low) / 2;
  return r;
}

void write_levels(std::ostream& out, const std::vector<GridState>& levels) {
  for (std::size_t i = 0; i < levels.size(); ++i) out << "; " << i << '\n' << sokoban::to_xsb(levels[i]) << '\n';
}

std::vector<GridState> read_levels(std::istream& in) {
  std::vector<GridState> out;
  std::string line, grid;
  const auto flush = [&] {
    if (!grid.empty()) out.push_back(sokoban::parse_xsb(grid));
    grid.clear();
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.starts_with(";") || line.find_first_not_of(' ') == std::string::npos) {
      flush();
      continue;
    }
    grid += line + '\n';
  }
  flush();
  return out;
}

std::vector<GridState> load_levels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open level file " + path);
  return read_levels(in);
}

std::vector<GridState> make_levels(std::size_t n, const train::BoardSpec& board, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GridState> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sokoban::generate_level(board.width, board.height, board.boxes, rng));
  return out;
}

Agent mctsnet_agent(const nn::ParamStore& store, const net::SubnetConfig& config, const net::EnvModel& model,
                    int simulations, std::uint64_t seed) {
  struct State {
    net::MemoryTree tree;
    std::mt19937_64 rng;
  };
  auto st = std::make_shared<State>(State{net::MemoryTree{}, std::mt19937_64(seed)});
  Agent a;
  a.reset = [st](const GridState& s) { st->tree = net::MemoryTree(s); };
  a.act = [st, &store, config, model, simulations](const GridState& s) {
    if (st->tree.empty() || !(st->tree.root_node().state == s)) st->tree = net::MemoryTree(s);
    nn::Gradients unused;
    nn::Graph g(store, unused);
    const auto result = net::run_search(g, config, st->tree, model, simulations, st->rng);
    const auto p = result.probs.values();
    const auto best = sokoban::action_from_index(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
    st->tree = net::replan_reroot(st->tree, best, model);
    return best;
  };
  return a;
}

namespace {

Agent baseline_agent(int simulations, const baseline::SearchConfig& search, const sokoban::RewardScheme& rewards,
                     std::function<std::array<double, 4>(const GridState&)> prior) {
  using Tree = baseline::BaselineTree<GridState>;
  auto tree = std::make_shared<Tree>();
  const auto model = baseline::sokoban_model(rewards);
  baseline::SearchConfig cfg = search;
  cfg.simulations = simulations;
  Agent a;
  a.reset = [tree](const GridState& s) { *tree = Tree(s, s.solved()); };
  a.act = [tree, model, cfg, rewards, prior](const GridState& s) {
    if (tree->size() == 0 || !(tree->root_node().state == s)) *tree = Tree(s, s.solved());
    auto value = [&](const GridState& st) { return baseline::heuristic_value(st, rewards, cfg.gamma); };
    auto out = baseline::run_search(std::move(*tree), model, value, cfg, prior);
    *tree = baseline::reuse_subtree(out.tree, out.action, model);
    return out.action;
  };
  return a;
}

}  // namespace

Agent uct_agent(int simulations, const baseline::SearchConfig& search, const sokoban::RewardScheme& rewards) {
  baseline::SearchConfig cfg = search;
  cfg.rule = baseline::SelectionRule::uct;
  return baseline_agent(simulations, cfg, rewards, {});
}

Agent puct_agent(const nn::ParamStore& prior, const net::SubnetConfig& config, int simulations,
                 const baseline::SearchConfig& search, const sokoban::RewardScheme& rewards) {
  baseline::SearchConfig cfg = search;
  cfg.rule = baseline::SelectionRule::puct;
  auto prior_fn = [&prior, config](const GridState& s) {
    nn::Gradients unused;
    nn::Graph g(prior, unused);
    const auto p = nn::softmax_values(g.value(net::prior_logits(g, config, s)).values());
    std::array<double, 4> out{};
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) total += p[i];
    for (std::size_t i = 0; i < 4; ++i) out[i] = p[i] / total;
    return out;
  };
  return baseline_agent(simulations, cfg, rewards, prior_fn);
}

Agent random_agent(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  Agent a;
  a.act = [rng](const GridState&) { return sokoban::action_from_index(std::uniform_int_distribution<int>(0, 3)(*rng)); };
  return a;
}

Agent oracle_agent(std::size_t budget) {
  struct Plan {
    std::vector<Action> actions;
    std::size_t next = 0;
    GridState expected;
    bool valid = false;
  };
  auto plan = std::make_shared<Plan>();
  Agent a;
  a.reset = [plan](const GridState&) { plan->valid = false; };
  a.act = [plan, budget](const GridState& s) {
    if (!plan->valid || !(plan->expected == s) || plan->next >= plan->actions.size()) {
      const auto found = sokoban::solve_oracle(s, budget);
      plan->actions = found.value_or(std::vector<Action>{Action::up});
      plan->next = 0;
      plan->valid = true;
    }
    const Action act = plan->actions[plan->next++];
    plan->expected = sokoban::transition(s, act).next;
    return act;
  };
  return a;
}

}  // namespace mctsnet::harness
