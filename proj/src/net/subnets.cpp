#include "mctsnet/net/subnets.hpp"

#include "mctsnet/errors.hpp"
#include "mctsnet/nn/ops.hpp"

namespace mctsnet::net {

namespace {

void add_linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng,
                bool zero = false) {
  if (zero) store.add_zeros(name + ".W", {in, out});
  else store.add_glorot(name + ".W", {in, out}, in, out, rng);
  store.add_zeros(name + ".b", {out});
}

void add_conv(ParamStore& store, const std::string& name, std::size_t out, std::size_t in, std::size_t k,
              std::mt19937_64& rng) {
  store.add_glorot(name + ".W", {out, in, k, k}, in * k * k, out * k * k, rng);
  store.add_zeros(name + ".b", {out});
}

void add_tower(ParamStore& store, const std::string& prefix, std::size_t channels, std::size_t blocks,
               std::size_t reduced, std::size_t out, std::size_t cells, std::mt19937_64& rng, bool zero_out) {
  add_conv(store, prefix + "stem", channels, 4, 3, rng);
  for (std::size_t b = 0; b < blocks; ++b) {
    add_conv(store, prefix + "block" + std::to_string(b) + ".conv1", channels, channels, 3, rng);
    add_conv(store, prefix + "block" + std::to_string(b) + ".conv2", channels, channels, 3, rng);
  }
  add_conv(store, prefix + "reduce", reduced, channels, 1, rng);
  add_linear(store, prefix + "out", reduced * cells, out, rng, zero_out);
}

// stem → residual blocks → 1×1 reduction → linear.
Var tower(Graph& g, const std::string& prefix, std::size_t blocks, Var x) {
  x = nn::relu(g, nn::conv3x3(g, x, prefix + "stem"));
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::string block = prefix + "block" + std::to_string(b);
    Var y = nn::relu(g, nn::conv3x3(g, x, block + ".conv1"));
    y = nn::conv3x3(g, y, block + ".conv2");
    x = nn::relu(g, nn::add(g, x, y));
  }
  x = nn::relu(g, nn::conv2d(g, x, prefix + "reduce"));
  const nn::Shape shape = g.value(x).shape();
  x = nn::reshape(g, x, {shape[0] * shape[1] * shape[2]});
  return nn::linear(g, x, prefix + "out");
}

Var mlp2(Graph& g, Var x, const std::string& prefix) {
  return nn::linear(g, nn::relu(g, nn::linear(g, x, prefix + "1")), prefix + "2");
}

void check_board(const SubnetConfig& config, const GridState& s) {
  if (s.width() != config.board_width || s.height() != config.board_height) {
    throw DimensionError("network expects " + std::to_string(config.board_width) + "x" +
                         std::to_string(config.board_height) + " boards, got " + std::to_string(s.width()) + "x" +
                         std::to_string(s.height()));
  }
}

}  // namespace

BackupKind parse_backup_kind(std::string_view s) {
  if (s == "gated") return BackupKind::gated;
  if (s == "mlp") return BackupKind::mlp;
  throw UsageError("unknown backup variant '" + std::string(s) + "'");
}

PolicyKind parse_policy_kind(std::string_view s) {
  if (s == "modulated" || s == "learned-modulated") return PolicyKind::modulated;
  if (s == "unstructured" || s == "learned-unstructured") return PolicyKind::unstructured;
  if (s == "uniform") return PolicyKind::uniform;
  if (s == "distilled") return PolicyKind::distilled;
  throw UsageError("unknown policy variant '" + std::string(s) + "'");
}

std::string_view backup_kind_name(BackupKind k) { return k == BackupKind::gated ? "gated" : "mlp"; }

std::string_view policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::modulated: return "modulated";
    case PolicyKind::unstructured: return "unstructured";
    case PolicyKind::uniform: return "uniform";
    case PolicyKind::distilled: return "distilled";
  }
  return "?";
}

void SubnetConfig::validate() const {
  if (board_width < 3 || board_height < 3 || board_width > sokoban::kMaxSide || board_height > sokoban::kMaxSide)
    throw UsageError("board size out of range");
  for (std::size_t v : {n, embed_channels, embed_reduced, readout_hidden, backup_hidden, simpol_hidden, prior_channels,
                        prior_reduced}) {
    if (v == 0) throw UsageError("network sizes must be positive");
  }
}

void init_prior_params(ParamStore& store, const SubnetConfig& config, std::mt19937_64& rng) {
  config.validate();
  const auto cells = static_cast<std::size_t>(config.board_width * config.board_height);
  add_tower(store, "prior.", config.prior_channels, config.prior_blocks, config.prior_reduced, 4, cells, rng, true);
}

void init_params(ParamStore& store, const SubnetConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::size_t n = config.n;
  const auto cells = static_cast<std::size_t>(config.board_width * config.board_height);
  add_tower(store, "embed.", config.embed_channels, config.embed_blocks, config.embed_reduced, n, cells, rng, false);

  const std::size_t phi = 2 * n + 1 + 4;
  if (config.backup == BackupKind::gated) {
    add_linear(store, "backup.gate1", phi, config.backup_hidden, rng);
    add_linear(store, "backup.gate2", config.backup_hidden, n, rng);
    add_linear(store, "backup.update1", phi, config.backup_hidden, rng);
    add_linear(store, "backup.update2", config.backup_hidden, n, rng);
  } else {
    add_linear(store, "backup.mlp1", phi, config.backup_hidden, rng);
    add_linear(store, "backup.mlp2", config.backup_hidden, n, rng);
  }

  switch (config.policy) {
    case PolicyKind::modulated:
      store.add("simpol.w0", Tensor::vector({1.0}));
      store.add("simpol.w1", Tensor::vector({0.0}));
      add_linear(store, "simpol.u1", 2 * n, config.simpol_hidden, rng);
      add_linear(store, "simpol.u2", config.simpol_hidden, 1, rng);
      break;
    case PolicyKind::unstructured:
      add_linear(store, "simpol.mlp1", n, config.simpol_hidden, rng);
      add_linear(store, "simpol.mlp2", config.simpol_hidden, 4, rng);
      break;
    case PolicyKind::uniform:
    case PolicyKind::distilled:
      break;
  }

  add_linear(store, "readout.1", n, config.readout_hidden, rng);
  add_linear(store, "readout.2", config.readout_hidden, 4, rng);

  if (config.uses_prior()) init_prior_params(store, config, rng);
}

Var embed(Graph& g, const SubnetConfig& config, const GridState& s) {
  check_board(config, s);
  return tower(g, "embed.", config.embed_blocks, g.constant(sokoban::encode(s)));
}

Var prior_logits(Graph& g, const SubnetConfig& config, const GridState& s) {
  check_board(config, s);
  return tower(g, "prior.", config.prior_blocks, g.constant(sokoban::encode(s)));
}

Var readout_logits(Graph& g, const SubnetConfig&, Var h_root) { return mlp2(g, h_root, "readout."); }

Var backup_step(Graph& g, const SubnetConfig& config, Var h_parent, Var h_child, double reward, Action a,
                std::optional<double> forced_gate) {
  Tensor extra({5}, 0.0);
  extra[0] = reward;
  extra[1 + static_cast<std::size_t>(sokoban::index(a))] = 1.0;
  const std::array<Var, 3> parts{h_parent, h_child, g.constant(std::move(extra))};
  const Var phi = nn::concat(g, parts);
  if (config.backup == BackupKind::mlp) return mlp2(g, phi, "backup.mlp");
  const Var update = nn::tanh(g, mlp2(g, phi, "backup.update"));
  const Var gate = forced_gate ? g.constant(Tensor({config.n}, *forced_gate))
                               : nn::sigmoid(g, mlp2(g, phi, "backup.gate"));
  return nn::add(g, h_parent, nn::mul(g, gate, update));
}

Var sim_policy_logits(Graph& g, const SubnetConfig& config, Var h_node, const std::array<Var, 4>& h_children,
                      std::optional<Var> log_prior) {
  if (config.uses_prior() && !log_prior) throw UsageError("simulation policy needs the prior log-probabilities");
  switch (config.policy) {
    case PolicyKind::uniform:
      return g.constant(Tensor({4}, 0.0));
    case PolicyKind::distilled:
      return *log_prior;
    case PolicyKind::unstructured:
      return mlp2(g, h_node, "simpol.mlp");
    case PolicyKind::modulated: {
      std::array<Var, 4> rows{};
      for (std::size_t a = 0; a < 4; ++a) {
        const std::array<Var, 2> pair{h_node, h_children[a]};
        rows[a] = nn::concat(g, pair);
      }
      const Var u = nn::reshape(g, mlp2(g, nn::stack(g, rows), "simpol.u"), {4});
      return nn::add(g, nn::scale_by(g, *log_prior, g.param("simpol.w0")), nn::scale_by(g, u, g.param("simpol.w1")));
    }
  }
  throw UsageError("unknown policy variant");
}

}  // namespace mctsnet::net
