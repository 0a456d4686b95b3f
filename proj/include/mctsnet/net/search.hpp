#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "mctsnet/net/subnets.hpp"

namespace mctsnet::net {

// Transition model used inside the search. The sham model keeps the state
// and pays no reward.
struct EnvModel {
  bool sham = false;
  sokoban::RewardScheme rewards{};

  sokoban::StepResult step(const GridState& s, Action a) const;
};

class MemoryTree {
 public:
  struct Node {
    GridState state;
    bool terminal = false;
    int visits = 0;
    std::optional<Tensor> h;
    std::array<int, 4> children{-1, -1, -1, -1};
    std::array<double, 4> rewards{};
  };

  MemoryTree() = default;
  explicit MemoryTree(GridState root);

  int root() const { return 0; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  Node& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const Node& root_node() const { return nodes_.front(); }

  int add_child(int parent, Action a, const sokoban::StepResult& step);
  std::size_t subtree_size(int id) const;
  // Breadth-first copy of the subtree under `id`, which becomes the root.
  MemoryTree extract(int id) const;

 private:
  std::vector<Node> nodes_;
};

struct PathStep {
  int node;
  Action action;
  double reward;
};

struct SimulationTrace {
  int m = 0;  // 1-based simulation index
  std::vector<PathStep> path;
  int leaf = 0;
  std::vector<Var> log_probs;  // log pi(a_t | h_t) per sampled action, on the tape
  std::vector<double> log_prob_values;
  std::vector<Var> entropies;  // policy entropy at each decision point
  double loss = 0.0;  // l_m, filled in by training

  std::vector<Action> actions() const;
};

struct SearchOptions {
  // Replays recorded simulation actions instead of sampling.
  const std::vector<std::vector<Action>>* replay = nullptr;
  // Called after each completed simulation.
  std::function<void(const MemoryTree&, const SimulationTrace&)> on_simulation;
};

struct SearchResult {
  Tensor probs;
  std::vector<Var> per_sim_logits;
  std::vector<Tensor> per_sim_probs;
  std::vector<SimulationTrace> traces;
  std::size_t model_calls = 0;
};

// Binds a MemoryTree to one Graph. Memories of nodes created in earlier
// graphs enter as constants; every update writes the value back to the tree.
class SearchGraph {
 public:
  SearchGraph(Graph& g, const SubnetConfig& config, MemoryTree& tree);

  Graph& graph() { return g_; }
  MemoryTree& tree() { return tree_; }
  const SubnetConfig& config() const { return config_; }

  Var memory(int node);
  void set_memory(int node, Var h);
  Var log_prior(int node);
  Var sim_policy_logits(int node);

 private:
  Graph& g_;
  const SubnetConfig& config_;
  MemoryTree& tree_;
  std::vector<std::optional<Var>> memory_;
  std::vector<std::optional<Var>> log_prior_;
  std::optional<Var> zeros_;
};

// One descent from the root: samples a_t from the simulation policy until
// the first unvisited node or a terminal one, expanding children through the
// model on the way.
SimulationTrace simulate(SearchGraph& sg, const EnvModel& env, std::mt19937_64& rng, int m,
                         const std::vector<Action>* replay = nullptr, std::size_t* model_calls = nullptr);

// M simulations with embedding at the leaf, reverse backups along the path
// and a readout after every simulation.
SearchResult run_search(Graph& g, const SubnetConfig& config, MemoryTree& tree, const EnvModel& env, int simulations,
                        std::mt19937_64& rng, const SearchOptions& options = {});

// The subtree under `a` becomes the new tree, memories unchanged. An
// unexpanded action yields a fresh tree rooted at the model's next state.
MemoryTree replan_reroot(const MemoryTree& tree, Action a, const EnvModel& env);

}  // namespace mctsnet::net
