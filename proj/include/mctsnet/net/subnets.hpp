#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "mctsnet/nn/graph.hpp"
#include "mctsnet/nn/param_store.hpp"
#include "mctsnet/sokoban/grid_state.hpp"

namespace mctsnet::net {

using nn::Graph;
using nn::ParamStore;
using nn::Tensor;
using nn::Var;
using sokoban::Action;
using sokoban::GridState;

enum class BackupKind { gated, mlp };
enum class PolicyKind { modulated, unstructured, uniform, distilled };

BackupKind parse_backup_kind(std::string_view s);
PolicyKind parse_policy_kind(std::string_view s);
std::string_view backup_kind_name(BackupKind k);
std::string_view policy_kind_name(PolicyKind k);

struct SubnetConfig {
  int board_width = 10;
  int board_height = 10;
  std::size_t n = 128;
  std::size_t embed_channels = 64;
  std::size_t embed_blocks = 3;
  std::size_t embed_reduced = 32;
  std::size_t readout_hidden = 128;
  std::size_t backup_hidden = 128;
  std::size_t simpol_hidden = 64;
  std::size_t prior_channels = 32;
  std::size_t prior_blocks = 2;
  std::size_t prior_reduced = 8;
  BackupKind backup = BackupKind::gated;
  PolicyKind policy = PolicyKind::modulated;

  // UsageError when a size is zero or the board is out of range.
  void validate() const;
  bool uses_prior() const { return policy == PolicyKind::modulated || policy == PolicyKind::distilled; }
};

// Registers every parameter the configuration uses: Glorot-uniform weights,
// zero biases, a zero final prior layer, and simpol.w0 = 1, simpol.w1 = 0.
void init_params(ParamStore& store, const SubnetConfig& config, std::mt19937_64& rng);
// Only the policy-prior parameters.
void init_prior_params(ParamStore& store, const SubnetConfig& config, std::mt19937_64& rng);

// Board encoding → memory vector [n].
Var embed(Graph& g, const SubnetConfig& config, const GridState& s);
// Board encoding → 4 prior logits.
Var prior_logits(Graph& g, const SubnetConfig& config, const GridState& s);
// Memory vector → 4 readout logits.
Var readout_logits(Graph& g, const SubnetConfig& config, Var h_root);

// New parent memory from (h_parent, h_child, r, one-hot a). `forced_gate`
// replaces the learned gate by a constant (gated variant only).
Var backup_step(Graph& g, const SubnetConfig& config, Var h_parent, Var h_child, double reward, Action a,
                std::optional<double> forced_gate = std::nullopt);

// Simulation-policy logits at a node. `h_children` holds the child memories
// with a zero vector for unexpanded actions; `log_prior` is required by the
// modulated and distilled variants.
Var sim_policy_logits(Graph& g, const SubnetConfig& config, Var h_node, const std::array<Var, 4>& h_children,
                      std::optional<Var> log_prior);

// Parameter-name prefixes per subnetwork.
inline constexpr std::array<std::string_view, 5> kSubnetPrefixes{"embed.", "backup.", "simpol.", "readout.", "prior."};

}  // namespace mctsnet::net
