#include "mctsnet/net/search.hpp"

#include <deque>

#include "mctsnet/errors.hpp"
#include "mctsnet/nn/ops.hpp"

namespace mctsnet::net {

sokoban::StepResult EnvModel::step(const GridState& s, Action a) const {
  if (sham) return {s, 0.0, false};
  return sokoban::transition(s, a, rewards);
}

MemoryTree::MemoryTree(GridState root) {
  Node n{std::move(root), false, 0, std::nullopt};
  n.terminal = n.state.solved();
  nodes_.push_back(std::move(n));
}

int MemoryTree::add_child(int parent, Action a, const sokoban::StepResult& step) {
  Node n{step.next, step.terminal, 0, std::nullopt};
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  const auto ai = static_cast<std::size_t>(sokoban::index(a));
  node(parent).children[ai] = id;
  node(parent).rewards[ai] = step.reward;
  return id;
}

std::size_t MemoryTree::subtree_size(int id) const {
  std::size_t count = 0;
  std::vector<int> stack{id};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    ++count;
    for (int c : node(cur).children)
      if (c >= 0) stack.push_back(c);
  }
  return count;
}

MemoryTree MemoryTree::extract(int id) const {
  MemoryTree out;
  std::deque<std::pair<int, int>> queue{{id, -1}};
  while (!queue.empty()) {
    const auto [src, slot] = queue.front();
    queue.pop_front();
    const int dst = static_cast<int>(out.nodes_.size());
    out.nodes_.push_back(node(src));
    if (slot >= 0) out.nodes_[static_cast<std::size_t>(slot / 4)].children[static_cast<std::size_t>(slot % 4)] = dst;
    for (int a = 0; a < 4; ++a) {
      const int c = node(src).children[static_cast<std::size_t>(a)];
      if (c >= 0) queue.emplace_back(c, dst * 4 + a);
    }
  }
  return out;
}

std::vector<Action> SimulationTrace::actions() const {
  std::vector<Action> out;
  out.reserve(path.size());
  for (const auto& p : path) out.push_back(p.action);
  return out;
}

SearchGraph::SearchGraph(Graph& g, const SubnetConfig& config, MemoryTree& tree)
    : g_(g), config_(config), tree_(tree) {}

Var SearchGraph::memory(int node) {
  const auto i = static_cast<std::size_t>(node);
  if (memory_.size() <= i) memory_.resize(tree_.size());
  if (!memory_[i]) {
    const auto& h = tree_.node(node).h;
    if (!h) throw UsageError("node " + std::to_string(node) + " has no memory");
    memory_[i] = g_.constant(*h);
  }
  return *memory_[i];
}

void SearchGraph::set_memory(int node, Var h) {
  const auto i = static_cast<std::size_t>(node);
  if (memory_.size() <= i) memory_.resize(tree_.size());
  memory_[i] = h;
  tree_.node(node).h = g_.value(h);
}

Var SearchGraph::log_prior(int node) {
  const auto i = static_cast<std::size_t>(node);
  if (log_prior_.size() <= i) log_prior_.resize(tree_.size());
  if (!log_prior_[i]) log_prior_[i] = nn::log_softmax(g_, prior_logits(g_, config_, tree_.node(node).state));
  return *log_prior_[i];
}

Var SearchGraph::sim_policy_logits(int node) {
  const Var h = memory(node);
  std::array<Var, 4> children{};
  if (config_.policy == PolicyKind::modulated) {
    for (std::size_t a = 0; a < 4; ++a) {
      const int c = tree_.node(node).children[a];
      if (c >= 0 && tree_.node(c).h) {
        children[a] = memory(c);
      } else {
        if (!zeros_) zeros_ = g_.constant(Tensor({config_.n}, 0.0));
        children[a] = *zeros_;
      }
    }
  }
  std::optional<Var> prior;
  if (config_.uses_prior()) prior = log_prior(node);
  return net::sim_policy_logits(g_, config_, h, children, prior);
}

SimulationTrace simulate(SearchGraph& sg, const EnvModel& env, std::mt19937_64& rng, int m,
                         const std::vector<Action>* replay, std::size_t* model_calls) {
  Graph& g = sg.graph();
  MemoryTree& tree = sg.tree();
  SimulationTrace trace;
  trace.m = m;
  int cur = tree.root();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (tree.node(cur).visits > 0 && !tree.node(cur).terminal) {
    const Var logits = sg.sim_policy_logits(cur);
    const Var logp = nn::log_softmax(g, logits);
    const Tensor lp = g.value(logp);
    std::size_t a = 3;
    if (replay) {
      if (trace.path.size() >= replay->size()) throw UsageError("replayed simulation ended early");
      a = static_cast<std::size_t>(sokoban::index((*replay)[trace.path.size()]));
    } else {
      const double u = unit(rng);
      double acc = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        acc += std::exp(lp[i]);
        if (u < acc) {
          a = i;
          break;
        }
      }
    }
    const Action action = sokoban::action_from_index(static_cast<int>(a));
    trace.log_probs.push_back(nn::pick(g, logp, a));
    trace.log_prob_values.push_back(lp[a]);
    trace.entropies.push_back(nn::entropy(g, logits));
    int child = tree.node(cur).children[a];
    if (child < 0) {
      const auto step = env.step(tree.node(cur).state, action);
      if (model_calls) ++*model_calls;
      child = tree.add_child(cur, action, step);
    }
    trace.path.push_back({cur, action, tree.node(cur).rewards[a]});
    cur = child;
  }
  if (replay && trace.path.size() != replay->size()) throw UsageError("replayed simulation is longer than the tree");
  trace.leaf = cur;
  return trace;
}

SearchResult run_search(Graph& g, const SubnetConfig& config, MemoryTree& tree, const EnvModel& env, int simulations,
                        std::mt19937_64& rng, const SearchOptions& options) {
  if (simulations < 1) throw UsageError("run_search needs at least one simulation");
  if (tree.empty()) throw UsageError("run_search needs a rooted tree");
  if (options.replay && static_cast<int>(options.replay->size()) != simulations)
    throw UsageError("replay holds a different number of simulations");
  SearchGraph sg(g, config, tree);
  SearchResult result;
  for (int m = 1; m <= simulations; ++m) {
    const auto* replay = options.replay ? &(*options.replay)[static_cast<std::size_t>(m - 1)] : nullptr;
    SimulationTrace trace = simulate(sg, env, rng, m, replay, &result.model_calls);
    auto& leaf = tree.node(trace.leaf);
    if (!leaf.h) sg.set_memory(trace.leaf, embed(g, config, leaf.state));
    leaf.visits += 1;
    for (std::size_t t = trace.path.size(); t-- > 0;) {
      const PathStep& step = trace.path[t];
      const int child = tree.node(step.node).children[static_cast<std::size_t>(sokoban::index(step.action))];
      sg.set_memory(step.node, backup_step(g, config, sg.memory(step.node), sg.memory(child), step.reward, step.action));
      tree.node(step.node).visits += 1;
    }
    const Var logits = readout_logits(g, config, sg.memory(tree.root()));
    result.per_sim_logits.push_back(logits);
    result.per_sim_probs.push_back(nn::softmax_values(g.value(logits).values()));
    if (options.on_simulation) options.on_simulation(tree, trace);
    result.traces.push_back(std::move(trace));
  }
  result.probs = result.per_sim_probs.back();
  return result;
}

MemoryTree replan_reroot(const MemoryTree& tree, Action a, const EnvModel& env) {
  const int child = tree.root_node().children[static_cast<std::size_t>(sokoban::index(a))];
  if (child >= 0) return tree.extract(child);
  return MemoryTree(env.step(tree.root_node().state, a).next);
}

}  // namespace mctsnet::net
