// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "enumeration.hpp"
#include "mctsnet/baseline/mcts.hpp"
#include "mctsnet/harness/compare.hpp"
#include "mctsnet/harness/gradcheck.hpp"

using namespace mctsnet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Verdict gradient_fidelity() {
  const auto t0 = Clock::now();
  const auto checks = harness::gradient_suite(2024);
  const double elapsed = seconds_since(t0);
  bool ok = elapsed < 60.0;
  double worst = 0.0;
  std::string worst_name;
  std::size_t coords = 0;
  for (const auto& c : checks) {
    ok = ok && c.report.passed && c.report.max_rel_error < 1e-4;
    coords += c.report.checked;
    if (c.report.max_rel_error >= worst) worst = c.report.max_rel_error, worst_name = c.name;
  }
  return {ok, fmt("%zu checks, %zu coordinates, worst rel err %.3g (%s), %.1f s", checks.size(), coords, worst,
                  worst_name.c_str(), elapsed)};
}

Verdict telescoping() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::uniform_int_distribution<int> len(1, 32);
  double worst_sum = 0.0, worst_g1 = 0.0;
  bool g0_exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> l(static_cast<std::size_t>(len(rng)));
    for (auto& v : l) v = u(rng);
    const auto r = train::telescoping_rewards(l);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(r.begin(), r.end(), 0.0) + l.back()));
    const auto greedy = train::discounted_returns(r, 0.0);
    const auto full = train::discounted_returns(r, 1.0);
    for (std::size_t m = 0; m < l.size(); ++m) {
      const double prev = m == 0 ? 0.0 : l[m - 1];
      g0_exact = g0_exact && greedy[m] == prev - l[m];
      worst_g1 = std::max(worst_g1, std::abs(full[m] - (prev - l.back())));
    }
  }
  return {worst_sum < 1e-12 && g0_exact && worst_g1 < 1e-12,
          fmt("1000 traces: max |sum r + l_M| %.2g; gamma=0 exact %s; gamma=1 max dev %.2g", worst_sum,
              g0_exact ? "yes" : "no", worst_g1)};
}

Verdict estimator_unbiasedness() {
  const auto t0 = Clock::now();
  const auto store = enumeration::store(11);
  const auto exact = enumeration::exact_gradient(store);
  constexpr std::size_t kSamples = 100000;
  // Slack for the central-difference oracle itself (step 1e-6).
  constexpr double kOracleSlack = 1e-7;
  std::string detail;
  bool ok = true;
  std::uint64_t seed = 5;
  for (auto kind : {train::EstimatorKind::basic, train::EstimatorKind::anytime}) {
    train::CreditConfig credit;
    credit.estimator = kind;
    credit.gamma = 1.0;
    credit.entropy_coeff = 0.0;
    const auto mc = enumeration::sample_estimator(store, credit, kSamples, seed++);
    std::size_t outside = 0;
    double worst_z = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
      const double dev = std::abs(mc.mean[i] - exact[i]);
      if (dev > 3 * mc.standard_error[i] + kOracleSlack) ++outside;
      if (mc.standard_error[i] > 1e-9) worst_z = std::max(worst_z, dev / mc.standard_error[i]);
    }
    ok = ok && outside == 0;
    detail += fmt("%s: %zu/%zu coords outside 3SE (max |z| %.2f); ", std::string(train::estimator_name(kind)).c_str(),
                  outside, exact.size(), worst_z);
  }
  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < 600.0;
  return {ok, detail + fmt("%zu samples each, %.1f s", kSamples, elapsed)};
}

bool bit_equal(const nn::Tensor& a, const nn::Tensor& b) {
  return a.size() == b.size() && std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

Verdict memory_gating() {
  const auto config = harness::RunConfig::desk_network();
  nn::ParamStore store;
  std::mt19937_64 rng(404);
  net::init_params(store, config, rng);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (const auto& name : store.names())
    for (double& v : store.value(name).values()) v += u(rng);
  const net::EnvModel env{};
  std::size_t checked = 0, violations = 0, sims = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto root = sokoban::generate_level(7, 7, 1, rng);
    net::MemoryTree tree(root);
    std::vector<std::optional<nn::Tensor>> before;
    net::SearchOptions opt;
    opt.on_simulation = [&](const net::MemoryTree& t, const net::SimulationTrace& trace) {
      ++sims;
      std::vector<bool> on_path(t.size(), false);
      for (const auto& p : trace.path) on_path[static_cast<std::size_t>(p.node)] = true;
      on_path[static_cast<std::size_t>(trace.leaf)] = true;
      for (std::size_t i = 0; i < before.size(); ++i) {
        if (on_path[i]) continue;
        ++checked;
        const auto& now = t.node(static_cast<int>(i)).h;
        if (before[i].has_value() != now.has_value() || (now && !bit_equal(*now, *before[i]))) ++violations;
      }
      before.clear();
      for (std::size_t i = 0; i < t.size(); ++i) before.push_back(t.node(static_cast<int>(i)).h);
    };
    nn::Gradients sink;
    nn::Graph g(store, sink);
    std::uniform_int_distribution<int> m(2, 16);
    net::run_search(g, config, tree, env, m(rng), rng, opt);
  }
  return {violations == 0 && checked > 0,
          fmt("100 trees, %zu simulations, %zu off-path memories compared, %zu changed", sims, checked, violations)};
}

Verdict uct_sanity() {
  using namespace baseline;
  struct Toy {
    int depth = 0;
    int code = 0;
  };
  std::size_t optimal = 0, q_checked = 0;
  double worst_q = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::array<double, 4> r1{};
    std::array<double, 16> r2{};
    for (auto& v : r1) v = u(rng);
    for (auto& v : r2) v = u(rng);
    Model<Toy> model;
    model.step = [&](const Toy& s, Action a) {
      const int ai = sokoban::index(a);
      const Toy next{s.depth + 1, s.code * 4 + ai};
      const double r = s.depth == 0 ? r1[static_cast<std::size_t>(ai)] : r2[static_cast<std::size_t>(next.code)];
      return ModelStep<Toy>{next, r, next.depth >= 2};
    };
    model.terminal = [](const Toy& s) { return s.depth >= 2; };
    int best = 0;
    double best_value = -1.0;
    for (int a = 0; a < 4; ++a) {
      double v = 0.0;
      for (int b = 0; b < 4; ++b) v = std::max(v, r2[static_cast<std::size_t>(a * 4 + b)]);
      v += r1[static_cast<std::size_t>(a)];
      if (v > best_value) best_value = v, best = a;
    }
    SearchConfig cfg;
    cfg.simulations = 512;
    cfg.gamma = 1.0;
    cfg.c = 1.0;
    cfg.log_returns = true;
    const auto out = run_search(BaselineTree<Toy>(Toy{}, false), model, [](const Toy&) { return 0.0; }, cfg);
    if (sokoban::index(out.action) == best) ++optimal;
    for (std::size_t id = 0; id < out.tree.size(); ++id) {
      const auto& n = out.tree.node(static_cast<int>(id));
      for (int a = 0; a < 4; ++a) {
        const auto& log = n.returns[static_cast<std::size_t>(a)];
        if (log.empty()) continue;
        const double mean = std::accumulate(log.begin(), log.end(), 0.0) / static_cast<double>(log.size());
        worst_q = std::max(worst_q, std::abs(n.stats.q[a] - mean));
        ++q_checked;
      }
    }
  }
  const double rate = static_cast<double>(optimal) / 200.0;
  return {rate >= 0.95 && worst_q <= 1e-12,
          fmt("optimal root action in %zu/200 runs (%.3f); %zu Q values, max |Q - mean return| %.2g", optimal, rate,
              q_checked, worst_q)};
}

harness::RunConfig desk_config() {
  harness::RunConfig c;
  c.step.simulations = 5;
  c.steps = 40000;
  c.log_every = 2000;
  c.eval_episodes = 300;
  c.seeds = {1, 2, 3, 4, 5};
  c.dataset_examples = 50000;
  c.cells = "real,sham,mlp,uniform,real@2,real@10";
  return c;
}

std::string describe_comparison(const harness::Comparison& c) {
  return fmt("%s %.3f+-%.3f vs %s %.3f+-%.3f, wins %zu/%zu, p=%.3g", c.a.variant.c_str(), c.a.mean, c.a.se,
             c.b.variant.c_str(), c.b.mean, c.b.se, c.wins, c.wins + c.losses + c.ties, c.p_value);
}

struct DeskResults {
  harness::CompareReport report;
  double seconds = 0.0;
  std::size_t examples = 0;
};

DeskResults run_desk(const fs::path& out_dir) {
  const auto config = desk_config();
  std::mt19937_64 rng(1);
  const auto data = train::generate_dataset_examples(config.dataset_examples, config.board, rng, config.oracle_budget);
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "desk_compare.csv");
  std::ofstream log(out_dir / "desk_compare.log");
  const auto t0 = Clock::now();
  DeskResults r;
  r.examples = data.size();
  r.report = harness::run_compare(config, data, &csv, &log);
  r.seconds = seconds_since(t0);
  return r;
}

Verdict overfit() {
  auto config = harness::RunConfig::desk_network();
  std::mt19937_64 rng(8);
  auto data = train::generate_dataset_examples(10, {7, 7, 1}, rng, 200000);
  data.resize(10);
  nn::ParamStore store;
  net::init_params(store, config, rng);
  train::TrainConfig tc;
  tc.net = config;
  tc.step = harness::RunConfig::desk_step();
  tc.steps = 5000;
  tc.log_every = 250;
  tc.eval_every = 0;
  std::ostringstream metrics;
  const auto summary = train::train_loop(tc, store, data, &metrics);
  std::istringstream lines(metrics.str());
  std::string line;
  std::getline(lines, line);
  long first_below = -1;
  double final_loss = 0.0;
  while (std::getline(lines, line)) {
    std::stringstream row(line);
    std::string step, loss;
    std::getline(row, step, ',');
    std::getline(row, loss, ',');
    final_loss = std::stod(loss);
    if (first_below < 0 && final_loss < 0.1) first_below = std::stol(step);
  }
  return {summary.finite && first_below > 0 && first_below <= 5000,
          fmt("10 examples, M=5: window loss first < 0.1 at step %ld, final %.4f", first_below, final_loss)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MCTSNET_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism(const fs::path& dir) {
  fs::remove_all(dir);
  const std::string data = (dir / "data" / "dataset.jsonl").string();
  if (run_cli("gen-dataset --examples 300 --seed 9 --out-dir " + (dir / "data").string()) != 0)
    return {false, "gen-dataset failed"};
  const std::string train = "train --dataset " + data +
                            " --set steps=600 --set log_every=100 --set eval_every=300 --set eval_episodes=10"
                            " --set workers=1 --seed 4 --out-dir ";
  const std::string compare = "compare --dataset " + data +
                              " --set steps=100 --set log_every=50 --set eval_episodes=10 --set prior_epochs=1"
                              " --set seeds=1,2 --set cells=real,sham,uct@5,random --seed 3 --out-dir ";
  const std::string eval = "eval --agent random --episodes 50 --seed 6 --out-dir ";
  struct Case {
    std::string name, args, file;
  };
  const std::vector<Case> cases{{"train", train, "metrics.csv"},
                                {"compare", compare, "compare.csv"},
                                {"eval", eval, "eval.csv"},
                                {"gen-levels", "gen-levels --n 20 --seed 7 --out-dir ", "levels.xsb"}};
  std::string detail;
  bool ok = true;
  for (const auto& c : cases) {
    const auto a = dir / (c.name + "_a");
    const auto b = dir / (c.name + "_b");
    const bool ran = run_cli(c.args + a.string()) == 0 && run_cli(c.args + b.string()) == 0;
    const std::string x = slurp(a / c.file);
    const bool same = ran && !x.empty() && x == slurp(b / c.file);
    ok = ok && same;
    detail += c.name + (same ? " identical; " : " DIFFERS; ");
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out_dir = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_out";
  fs::create_directories(out_dir);
  int failures = 0;
  const auto report = [&](const std::string& name, const Verdict& v) {
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
    if (!v.pass) ++failures;
  };
  const auto guarded = [&](const std::string& name, const std::function<Verdict()>& f) {
    try {
      report(name, f());
    } catch (const std::exception& e) {
      report(name, {false, std::string("threw: ") + e.what()});
    }
  };

  guarded("gradient fidelity", gradient_fidelity);
  guarded("telescoping identity", telescoping);
  guarded("estimator unbiasedness", estimator_unbiasedness);
  guarded("memory gating", memory_gating);
  guarded("UCT sanity", uct_sanity);
  guarded("overfit sanity", overfit);
  guarded("determinism", [&] { return determinism(out_dir / "determinism"); });

  const bool quick = argc > 2 && std::string(argv[2]) == "--quick";
  std::optional<DeskResults> desk;
  if (!quick) try {
    desk = run_desk(out_dir);
  } catch (const std::exception& e) {
    report("desk-scale runs", {false, std::string("threw: ") + e.what()});
  }
  if (desk) {
    const auto& rows = desk->report.rows;
    const std::string budget = fmt(" [%zu examples, %.0f s total]", desk->examples, desk->seconds);
    const auto a = harness::compare("real", "sham", rows);
    report("desk ordering (a) real model exceeds sham", {a.better, describe_comparison(a) + budget});
    const auto b = harness::compare("real", "mlp", rows);
    const bool finite = b.a.all_finite && b.b.all_finite;
    report("desk ordering (b) gated meets or exceeds mlp, both finite",
           {b.meets && finite, describe_comparison(b) + (finite ? ", all finite" : ", NON-FINITE run")});
    const auto c = harness::compare("real", "uniform", rows);
    report("desk ordering (c) learned policy meets or exceeds uniform", {c.meets, describe_comparison(c)});
    const auto s = harness::compare("real@10", "real@2", rows);
    report("scaling M=10 beats M=2", {s.better, describe_comparison(s)});
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
