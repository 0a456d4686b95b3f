#include "mctsnet/harness/gradcheck.hpp"

#include <random>

#include "mctsnet/net/search.hpp"
#include "mctsnet/nn/ops.hpp"
#include "mctsnet/sokoban/generator.hpp"

namespace mctsnet::harness {

namespace {

using net::BackupKind;
using net::PolicyKind;
using nn::Graph;
using nn::Tensor;
using nn::Var;

net::SubnetConfig small_config(BackupKind backup, PolicyKind policy) {
  net::SubnetConfig c;
  c.board_width = 5;
  c.board_height = 5;
  c.n = 6;
  c.embed_channels = 3;
  c.embed_blocks = 1;
  c.embed_reduced = 2;
  c.readout_hidden = 5;
  c.backup_hidden = 5;
  c.simpol_hidden = 4;
  c.prior_channels = 2;
  c.prior_blocks = 1;
  c.prior_reduced = 2;
  c.backup = backup;
  c.policy = policy;
  return c;
}

nn::ParamStore random_store(const net::SubnetConfig& c, std::mt19937_64& rng) {
  nn::ParamStore store;
  net::init_params(store, c, rng);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (const auto& name : store.names())
    for (double& v : store.value(name).values()) v = u(rng);
  return store;
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> out(n);
  for (auto& v : out) v = u(rng);
  return out;
}

// Quadratic probe that gives every output coordinate its own weight.
Var probe(Graph& g, Var out, const std::vector<double>& weights) {
  const Var w = g.constant(Tensor({weights.size()}, weights));
  return nn::sum(g, nn::mul(g, nn::mul(g, out, out), w));
}

}  // namespace

std::vector<GradientCheck> gradient_suite(std::uint64_t seed, double tolerance) {
  std::mt19937_64 rng(seed);
  std::vector<GradientCheck> out;
  nn::GradCheckOptions opt;
  opt.samples = 0;
  opt.tolerance = tolerance;
  const auto run = [&](const std::string& name, nn::ParamStore& store, std::vector<std::string> prefixes,
                       const nn::LossBuilder& build) {
    opt.prefixes = std::move(prefixes);
    out.push_back({name, nn::grad_check(store, build, opt)});
  };

  const auto gated = small_config(BackupKind::gated, PolicyKind::modulated);
  const sokoban::GridState s = sokoban::generate_level(5, 5, 1, rng);
  nn::ParamStore store = random_store(gated, rng);
  const auto w_n = random_vector(gated.n, rng);
  const auto w_4 = random_vector(4, rng);

  run("embed", store, {"embed."}, [&](Graph& g) { return probe(g, net::embed(g, gated, s), w_n); });
  run("readout", store, {"readout."}, [&](Graph& g) {
    const Var h = g.constant(Tensor({gated.n}, w_n));
    return nn::softmax_xent(g, net::readout_logits(g, gated, h), 2).loss;
  });
  run("prior", store, {"prior."}, [&](Graph& g) { return nn::softmax_xent(g, net::prior_logits(g, gated, s), 1).loss; });

  const auto hp = random_vector(gated.n, rng);
  const auto hc = random_vector(gated.n, rng);
  run("backup-gated", store, {"backup."}, [&](Graph& g) {
    const Var out = net::backup_step(g, gated, g.constant(Tensor({gated.n}, hp)), g.constant(Tensor({gated.n}, hc)),
                                     -0.1, sokoban::Action::left);
    return probe(g, out, w_n);
  });
  const auto mlp = small_config(BackupKind::mlp, PolicyKind::modulated);
  nn::ParamStore mlp_store = random_store(mlp, rng);
  run("backup-mlp", mlp_store, {"backup."}, [&](Graph& g) {
    const Var out = net::backup_step(g, mlp, g.constant(Tensor({mlp.n}, hp)), g.constant(Tensor({mlp.n}, hc)), 1.0,
                                     sokoban::Action::down);
    return probe(g, out, w_n);
  });

  run("simulation-policy", store, {"simpol.", "prior."}, [&](Graph& g) {
    const Var h = g.constant(Tensor({gated.n}, hp));
    const std::array<Var, 4> children{g.constant(Tensor({gated.n}, hc)), g.constant(Tensor({gated.n}, 0.0)),
                                      g.constant(Tensor({gated.n}, w_n)), g.constant(Tensor({gated.n}, 0.0))};
    const Var log_prior = nn::log_softmax(g, net::prior_logits(g, gated, s));
    return probe(g, net::sim_policy_logits(g, gated, h, children, log_prior), w_4);
  });

  const net::EnvModel env{};
  for (const auto& [name, config, st] :
       {std::tuple{"search-loss-gated", gated, &store}, std::tuple{"search-loss-mlp", mlp, &mlp_store}}) {
    net::MemoryTree tree(s);
    nn::Gradients sink;
    Graph g(*st, sink);
    const auto res = net::run_search(g, config, tree, env, 6, rng);
    std::vector<std::vector<sokoban::Action>> z;
    for (const auto& t : res.traces) z.push_back(t.actions());
    run(name, *st, {}, [&, cfg = config](Graph& gg) {
      net::MemoryTree fresh(s);
      std::mt19937_64 unused(0);
      net::SearchOptions o;
      o.replay = &z;
      const auto r = net::run_search(gg, cfg, fresh, env, 6, unused, o);
      return nn::softmax_xent(gg, r.per_sim_logits.back(), 1).loss;
    });
  }
  return out;
}

}  // namespace mctsnet::harness
