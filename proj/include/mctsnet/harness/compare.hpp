#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mctsnet/harness/config.hpp"
#include "mctsnet/harness/eval.hpp"

namespace mctsnet::harness {

enum class CellKind { mctsnet, uct, puct, random };

// One column of a comparison. Tokens: real, sham, mlp, uniform, distilled,
// unstructured (trained MCTSnet variants), uct, puct, random; an optional
// "@M" suffix sets the simulation count.
struct Cell {
  std::string name;
  CellKind kind = CellKind::mctsnet;
  bool sham = false;
  net::BackupKind backup = net::BackupKind::gated;
  net::PolicyKind policy = net::PolicyKind::modulated;
  std::optional<int> simulations;
};

Cell parse_cell(const std::string& token);
std::vector<Cell> parse_cells(const std::string& list);

struct CellResult {
  std::string variant;
  std::uint64_t seed = 0;
  EvalResult eval;
  double final_loss = 0.0;
  bool finite = true;
  std::string status = "ok";
};

struct Aggregate {
  std::string variant;
  double mean = 0.0;
  double se = 0.0;  // sample standard deviation over seeds / sqrt(seeds)
  std::size_t seeds = 0;
  bool all_finite = true;
};

Aggregate aggregate(const std::string& variant, const std::vector<CellResult>& rows);

// Upper tail P(X >= wins) for X ~ Binomial(trials, 1/2).
double sign_test_p(std::size_t wins, std::size_t trials);

struct Comparison {
  Aggregate a;
  Aggregate b;
  std::size_t wins = 0;  // seeds where a beats b
  std::size_t losses = 0;
  std::size_t ties = 0;
  double p_value = 1.0;  // one-sided, ties dropped
  bool separated = false;  // mean_a - se_a > mean_b + se_b
  bool better = false;  // separated or p < 0.05
  bool meets = false;  // b is not significantly better than a
};

Comparison compare(const std::string& a, const std::string& b, const std::vector<CellResult>& rows);

inline constexpr char kCompareHeader[] = "variant,seed,success_ratio,se,episodes,ci_low,ci_high,final_loss,finite,status";

struct CompareReport {
  std::vector<CellResult> rows;
  std::vector<Aggregate> aggregates;
};

// Trains and evaluates every cell for every seed. The prior is trained once
// per seed and shared by the cells that need it. Per-seed rows are written
// to `csv` as they finish, followed by one aggregate row per variant.
CompareReport run_compare(const RunConfig& config, const std::vector<train::LabeledExample>& data,
                          std::ostream* csv, std::ostream* log = nullptr, const std::string& metrics_dir = "");

void write_row(std::ostream& out, const CellResult& row);
void write_aggregate(std::ostream& out, const Aggregate& agg, const std::vector<CellResult>& rows);

}  // namespace mctsnet::harness
