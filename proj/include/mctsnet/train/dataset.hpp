#pragma once

#include <cstddef>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "mctsnet/sokoban/generator.hpp"

namespace mctsnet::train {

using sokoban::Action;
using sokoban::GridState;

struct LabeledExample {
  int level_id = 0;
  int step = 0;
  GridState level;
  GridState state;
  Action label = Action::up;
};

struct BoardSpec {
  int width = 7;
  int height = 7;
  int boxes = 1;
};

struct DatasetStats {
  std::size_t levels = 0;  // levels that contributed examples
  std::size_t skipped = 0;  // levels the oracle could not solve in budget
  std::size_t examples = 0;
  bool unsolvable_warning() const { return skipped * 2 > levels + skipped; }
};

// Generates `n_levels` levels, unrolls each oracle plan and emits one
// example per (state, next plan action). Unsolved levels are skipped.
std::vector<LabeledExample> generate_dataset(std::size_t n_levels, const BoardSpec& board, std::mt19937_64& rng,
                                             std::size_t oracle_budget, DatasetStats* stats = nullptr);

// Levels are generated until at least `min_examples` examples exist.
std::vector<LabeledExample> generate_dataset_examples(std::size_t min_examples, const BoardSpec& board,
                                                      std::mt19937_64& rng, std::size_t oracle_budget,
                                                      DatasetStats* stats = nullptr);

// JSON lines: {"level": xsb, "step": int, "state": xsb, "label": 0..3}.
void write_dataset(std::ostream& out, const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> read_dataset(std::istream& in);
void save_dataset(const std::string& path, const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> load_dataset(const std::string& path);

}  // namespace mctsnet::train
