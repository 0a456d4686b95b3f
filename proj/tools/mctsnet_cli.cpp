#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mctsnet/errors.hpp"
#include "mctsnet/harness/compare.hpp"
#include "mctsnet/harness/config.hpp"
#include "mctsnet/harness/eval.hpp"
#include "mctsnet/harness/gradcheck.hpp"
#include "mctsnet/nn/checkpoint.hpp"

using namespace mctsnet;
using namespace mctsnet::harness;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string out_dir = ".";
};

RunConfig load_config(const Common& common) {
  RunConfig config;
  if (!common.config_path.empty()) apply_settings(config, load_key_values(common.config_path));
  KeyValues extra;
  for (const auto& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    extra[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  apply_settings(config, extra);
  config.validate();
  return config;
}

fs::path out_path(const Common& common, const std::string& name) {
  fs::create_directories(common.out_dir);
  return fs::path(common.out_dir) / name;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::vector<train::LabeledExample> dataset_for(const RunConfig& config, const std::string& flag) {
  const std::string path = flag.empty() ? config.dataset : flag;
  if (path.empty()) throw UsageError("no dataset given (use --dataset or the dataset key)");
  if (!fs::exists(path)) throw IoError("dataset not found: " + path);
  auto data = train::load_dataset(path);
  if (data.empty()) throw IoError("dataset is empty: " + path);
  return data;
}

void load_prior_into(nn::ParamStore& store, const std::string& path) {
  const auto prior = nn::load_checkpoint(path);
  for (const auto& [name, entry] : prior.entries()) {
    if (!name.starts_with("prior.")) continue;
    if (!store.contains(name)) throw DimensionError("prior checkpoint has unexpected parameter " + name);
    if (store.value(name).shape() != entry.value.shape()) throw DimensionError("shape mismatch for " + name);
    store.value(name) = entry.value;
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int cmd_gen_levels(const Common& common, std::size_t n, const std::string& out_name) {
  const RunConfig config = load_config(common);
  const std::size_t count = n > 0 ? n : config.levels;
  std::mt19937_64 rng(common.seed);
  std::vector<GridState> levels;
  std::size_t failures = 0;
  while (levels.size() < count) {
    GridState s = sokoban::generate_level(config.board.width, config.board.height, config.board.boxes, rng);
    if (sokoban::solve_oracle(s, config.oracle_budget)) levels.push_back(std::move(s));
    else ++failures;
  }
  auto out = open_out(out_path(common, out_name));
  write_levels(out, levels);
  const double rate = static_cast<double>(failures) / static_cast<double>(failures + levels.size());
  std::cout << "levels " << levels.size() << " oracle_failures " << failures << " failure_rate " << fmt(rate) << '\n';
  return 0;
}

int cmd_gen_dataset(const Common& common, std::size_t examples, const std::string& out_name) {
  const RunConfig config = load_config(common);
  std::mt19937_64 rng(common.seed);
  train::DatasetStats stats;
  const auto data = train::generate_dataset_examples(examples > 0 ? examples : config.dataset_examples, config.board,
                                                     rng, config.oracle_budget, &stats);
  train::save_dataset(out_path(common, out_name).string(), data);
  const double rate = static_cast<double>(stats.skipped) / static_cast<double>(stats.skipped + stats.levels);
  std::cout << "levels " << stats.levels << " examples " << stats.examples << " oracle_failures " << stats.skipped
            << " failure_rate " << fmt(rate) << '\n';
  if (stats.unsolvable_warning()) std::cerr << "warning: most generated levels were not solved within budget\n";
  return 0;
}

int cmd_train_prior(const Common& common, const std::string& dataset) {
  const RunConfig config = load_config(common);
  const auto data = dataset_for(config, dataset);
  std::mt19937_64 rng(common.seed);
  nn::ParamStore store;
  net::init_prior_params(store, config.net, rng);
  const auto report = train::train_policy_prior(store, config.net, data, config.prior, rng);
  nn::save_checkpoint(out_path(common, "prior.bin"), store);
  auto out = open_out(out_path(common, "prior_metrics.csv"));
  out << "epochs,loss,accuracy\n" << config.prior.epochs << ',' << fmt(report.loss) << ',' << fmt(report.accuracy)
      << '\n';
  std::cout << "prior loss " << fmt(report.loss) << " accuracy " << fmt(report.accuracy) << '\n';
  return 0;
}

int cmd_train(const Common& common, const std::string& dataset, const std::string& resume, const std::string& prior) {
  const RunConfig config = load_config(common);
  const auto data = dataset_for(config, dataset);
  train::TrainConfig tc = config.train_config(common.seed);
  tc.checkpoint_dir = out_path(common, "checkpoints").string();
  nn::ParamStore store;
  std::mt19937_64 rng(common.seed);
  net::init_params(store, tc.net, rng);
  if (!prior.empty()) load_prior_into(store, prior);
  if (!resume.empty()) nn::load_checkpoint_into(resume, store);
  const auto levels = make_levels(config.eval_episodes, config.board, common.seed + 1000003ULL);
  const net::EnvModel model{tc.sham, {}};
  const auto evaluate = [&](const nn::ParamStore& s) {
    return evaluate_agent(mctsnet_agent(s, tc.net, model, tc.step.simulations, common.seed), levels).success_ratio;
  };
  auto metrics = open_out(out_path(common, "metrics.csv"));
  const auto summary = train::train_loop(tc, store, data, &metrics, evaluate);
  nn::save_checkpoint(out_path(common, "model.bin"), store);
  std::cout << "steps " << summary.steps << " loss " << fmt(summary.last_loss) << '\n';
  return 0;
}

int cmd_eval(const Common& common, const std::string& agent_name, const std::string& checkpoint,
             const std::string& prior, const std::string& levels_path, std::size_t episodes) {
  const RunConfig config = load_config(common);
  const auto levels = levels_path.empty()
                          ? make_levels(episodes > 0 ? episodes : config.eval_episodes, config.board, common.seed)
                          : load_levels(levels_path);
  baseline::SearchConfig search;
  search.c = config.uct_c;
  nn::ParamStore store;
  Agent agent;
  if (agent_name == "mctsnet") {
    if (checkpoint.empty()) throw UsageError("eval of mctsnet needs --checkpoint");
    std::mt19937_64 rng(common.seed);
    net::init_params(store, config.net, rng);
    nn::load_checkpoint_into(checkpoint, store);
    agent = mctsnet_agent(store, config.net, net::EnvModel{config.sham, {}}, config.step.simulations, common.seed);
  } else if (agent_name == "uct") {
    agent = uct_agent(config.step.simulations, search);
  } else if (agent_name == "puct") {
    if (prior.empty()) throw UsageError("eval of puct needs --prior");
    std::mt19937_64 rng(common.seed);
    net::init_prior_params(store, config.net, rng);
    nn::load_checkpoint_into(prior, store);
    agent = puct_agent(store, config.net, config.step.simulations, search);
  } else if (agent_name == "random") {
    agent = random_agent(common.seed);
  } else {
    agent = oracle_agent(config.oracle_budget);
  }
  const auto r = evaluate_agent(agent, levels);
  auto out = open_out(out_path(common, "eval.csv"));
  out << "agent,episodes,successes,success_ratio,ci_low,ci_high,half_width,mean_steps\n"
      << agent_name << ',' << r.episodes << ',' << r.successes << ',' << fmt(r.success_ratio) << ','
      << fmt(r.interval.low) << ',' << fmt(r.interval.high) << ',' << fmt(r.half_width) << ','
      << fmt(r.mean_steps_to_solve) << '\n';
  std::cout << agent_name << " success " << fmt(r.success_ratio) << " +- " << fmt(r.half_width) << " over "
            << r.episodes << " episodes\n";
  return 0;
}

int cmd_compare(const Common& common, const std::string& dataset) {
  RunConfig config = load_config(common);
  if (common.seed_given) {
    const std::size_t n = config.seeds.size();
    config.seeds.clear();
    for (std::size_t i = 0; i < n; ++i) config.seeds.push_back(common.seed + i);
  }
  const auto data = dataset_for(config, dataset);
  auto csv = open_out(out_path(common, "compare.csv"));
  const auto report = run_compare(config, data, &csv, &std::cerr, out_path(common, "metrics").string());
  for (const auto& a : report.aggregates)
    std::cout << a.variant << " mean " << fmt(a.mean) << " se " << fmt(a.se) << " seeds " << a.seeds << '\n';
  return 0;
}

int cmd_gradcheck(const Common& common) {
  const auto checks = gradient_suite(common.seed);
  auto out = open_out(out_path(common, "gradcheck.csv"));
  out << "check,coordinates,skipped_kinks,max_rel_error,passed\n";
  bool ok = true;
  for (const auto& c : checks) {
    out << c.name << ',' << c.report.checked << ',' << c.report.skipped_kinks << ',' << fmt(c.report.max_rel_error)
        << ',' << (c.report.passed ? "true" : "false") << '\n';
    std::cout << c.name << ' ' << (c.report.passed ? "ok" : "FAIL") << " max_rel_error "
              << fmt(c.report.max_rel_error) << '\n';
    ok = ok && c.report.passed;
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MCTSnet on Sokoban: data generation, training, evaluation and comparisons"};
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", common.overrides, "config override key=value (repeatable)");
    sub->add_option("--seed", common.seed, "random seed")->each([&](const std::string&) { common.seed_given = true; });
    sub->add_option("--out-dir", common.out_dir, "output directory");
  };

  std::size_t n = 0, episodes = 0;
  std::string levels_out, dataset_out, dataset, resume, prior, checkpoint, levels, agent = "mctsnet";

  auto* gen_levels = app.add_subcommand("gen-levels", "generate oracle-verified levels (XSB)");
  add_common(gen_levels);
  gen_levels->add_option("--n", n, "number of levels (default: levels key)");
  gen_levels->add_option("--out", levels_out, "file name in the output directory")->default_val("levels.xsb");

  auto* gen_dataset = app.add_subcommand("gen-dataset", "generate an oracle-labelled dataset (JSON lines)");
  add_common(gen_dataset);
  gen_dataset->add_option("--examples", n, "minimum number of examples (default: dataset_examples key)");
  gen_dataset->add_option("--out", dataset_out, "file name in the output directory")->default_val("dataset.jsonl");

  auto* train_prior = app.add_subcommand("train-prior", "supervised training of the policy prior");
  add_common(train_prior);
  train_prior->add_option("--dataset", dataset, "dataset file");

  auto* train = app.add_subcommand("train", "train MCTSnet");
  add_common(train);
  train->add_option("--dataset", dataset, "dataset file");
  train->add_option("--resume", resume, "checkpoint to continue from")->check(CLI::ExistingFile);
  train->add_option("--prior", prior, "trained prior checkpoint")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "run an agent on fresh levels");
  add_common(eval);
  eval->add_option("--agent", agent, "agent")->check(CLI::IsMember({"mctsnet", "uct", "puct", "random", "oracle"}));
  eval->add_option("--checkpoint", checkpoint, "MCTSnet checkpoint")->check(CLI::ExistingFile);
  eval->add_option("--prior", prior, "prior checkpoint for puct")->check(CLI::ExistingFile);
  eval->add_option("--levels", levels, "level file (default: fresh generated levels)")->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "number of fresh levels (default: eval_episodes key)");

  auto* compare = app.add_subcommand("compare", "train and evaluate the variant grid over seeds");
  add_common(compare);
  compare->add_option("--dataset", dataset, "dataset file");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every subnetwork");
  add_common(gradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen_levels) return cmd_gen_levels(common, n, levels_out);
    if (*gen_dataset) return cmd_gen_dataset(common, n, dataset_out);
    if (*train_prior) return cmd_train_prior(common, dataset);
    if (*train) return cmd_train(common, dataset, resume, prior);
    if (*eval) return cmd_eval(common, agent, checkpoint, prior, levels, episodes);
    if (*compare) return cmd_compare(common, dataset);
    if (*gradcheck) return cmd_gradcheck(common);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
