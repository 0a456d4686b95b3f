#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mctsnet/train/trainer.hpp"

namespace mctsnet::harness {

using KeyValues = std::map<std::string, std::string>;

// `key = value` lines; blank lines and lines starting with '#' are ignored.
KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::string& path);

// Everything one command needs. Defaults are the desk-scale setup: 7x7
// boards with one box and a reduced network.
struct RunConfig {
  train::BoardSpec board{};
  net::SubnetConfig net = desk_network();
  train::StepConfig step = desk_step();
  bool sham = false;
  int batch = 1;
  long steps = 20000;
  long log_every = 500;
  long eval_every = 0;
  long checkpoint_every = 0;
  double baseline_decay = 0.0;
  std::size_t eval_episodes = 100;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t oracle_budget = 200000;
  std::size_t dataset_examples = 50000;
  std::size_t levels = 100;
  train::PriorTrainConfig prior{};
  double uct_c = 1.25;
  std::string cells = "real,sham,mlp,uniform,distilled,real@2,real@10,uct,puct,random";
  std::string dataset;

  static net::SubnetConfig desk_network();
  static train::StepConfig desk_step();

  train::TrainConfig train_config(std::uint64_t seed) const;
  void validate() const;
};

// Applies every pair; unknown keys and malformed values are UsageErrors.
void apply_settings(RunConfig& config, const KeyValues& values);
// Canonical key=value dump, readable by apply_settings().
std::string describe(const RunConfig& config);

}  // namespace mctsnet::harness
