#include "mctsnet/train/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "mctsnet/errors.hpp"

namespace mctsnet::train {

namespace {

void append_level(const GridState& level, int level_id, const std::vector<Action>& plan,
                  std::vector<LabeledExample>& out) {
  GridState s = level;
  for (std::size_t t = 0; t < plan.size(); ++t) {
    out.push_back({level_id, static_cast<int>(t), level, s, plan[t]});
    s = sokoban::transition(s, plan[t]).next;
  }
}

}  // namespace

std::vector<LabeledExample> generate_dataset(std::size_t n_levels, const BoardSpec& board, std::mt19937_64& rng,
                                             std::size_t oracle_budget, DatasetStats* stats) {
  std::vector<LabeledExample> out;
  DatasetStats local;
  for (std::size_t i = 0; i < n_levels; ++i) {
    const GridState level = sokoban::generate_level(board.width, board.height, board.boxes, rng);
    const auto plan = sokoban::solve_oracle(level, oracle_budget);
    if (!plan) {
      ++local.skipped;
      continue;
    }
    append_level(level, static_cast<int>(local.levels), *plan, out);
    ++local.levels;
  }
  local.examples = out.size();
  if (stats) *stats = local;
  return out;
}

std::vector<LabeledExample> generate_dataset_examples(std::size_t min_examples, const BoardSpec& board,
                                                      std::mt19937_64& rng, std::size_t oracle_budget,
                                                      DatasetStats* stats) {
  std::vector<LabeledExample> out;
  DatasetStats local;
  while (out.size() < min_examples) {
    const GridState level = sokoban::generate_level(board.width, board.height, board.boxes, rng);
    const auto plan = sokoban::solve_oracle(level, oracle_budget);
    if (!plan) {
      ++local.skipped;
      if (local.skipped > 1000 && local.levels == 0) throw GenerationError("oracle solves no generated level");
      continue;
    }
    append_level(level, static_cast<int>(local.levels), *plan, out);
    ++local.levels;
  }
  local.examples = out.size();
  if (stats) *stats = local;
  return out;
}

void write_dataset(std::ostream& out, const std::vector<LabeledExample>& examples) {
  for (const auto& e : examples) {
    nlohmann::ordered_json j;
    j["level"] = sokoban::to_xsb(e.level);
    j["step"] = e.step;
    j["state"] = sokoban::to_xsb(e.state);
    j["label"] = sokoban::index(e.label);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed to write dataset");
}

std::vector<LabeledExample> read_dataset(std::istream& in) {
  std::vector<LabeledExample> out;
  std::string line;
  std::string last_level;
  int level_id = -1;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string level = j.at("level").get<std::string>();
      if (level != last_level || level_id < 0) {
        ++level_id;
        last_level = level;
      }
      const int label = j.at("label").get<int>();
      if (label < 0 || label > 3) throw UsageError("label out of range");
      out.push_back({level_id, j.at("step").get<int>(), sokoban::parse_xsb(level),
                     sokoban::parse_xsb(j.at("state").get<std::string>()), sokoban::action_from_index(label)});
    } catch (const nlohmann::json::exception& e) {
      throw IoError("dataset line " + std::to_string(line_no) + ": " + e.what());
    } catch (const UsageError& e) {
      throw IoError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_dataset(const std::string& path, const std::vector<LabeledExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_dataset(out, examples);
}

std::vector<LabeledExample> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path);
  return read_dataset(in);
}

}  // namespace mctsnet::train
