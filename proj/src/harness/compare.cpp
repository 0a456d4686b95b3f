#include "mctsnet/harness/compare.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "mctsnet/errors.hpp"

namespace mctsnet::harness {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double binomial_se(const EvalResult& e) {
  if (e.episodes == 0) return 0.0;
  const double p = e.success_ratio;
  return std::sqrt(p * (1 - p) / static_cast<double>(e.episodes));
}

std::vector<const CellResult*> rows_of(const std::string& variant, const std::vector<CellResult>& rows) {
  std::vector<const CellResult*> out;
  for (const auto& r : rows)
    if (r.variant == variant) out.push_back(&r);
  return out;
}

// Distinct seed streams for prior init, network init and evaluation levels.
std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) { return seed * 1000003ULL + salt; }

}  // namespace

Cell parse_cell(const std::string& token) {
  Cell c;
  c.name = token;
  std::string base = token;
  if (const auto at = token.find('@'); at != std::string::npos) {
    base = token.substr(0, at);
    const std::string m = token.substr(at + 1);
    try {
      std::size_t used = 0;
      const int sims = std::stoi(m, &used);
      if (used != m.size() || sims < 1) throw std::invalid_argument(m);
      c.simulations = sims;
    } catch (const std::exception&) {
      throw UsageError("bad simulation count in cell '" + token + "'");
    }
  }
  if (base == "real") {
  } else if (base == "sham") {
    c.sham = true;
  } else if (base == "mlp") {
    c.backup = net::BackupKind::mlp;
  } else if (base == "uniform" || base == "distilled" || base == "unstructured") {
    c.policy = net::parse_policy_kind(base);
  } else if (base == "uct") {
    c.kind = CellKind::uct;
  } else if (base == "puct") {
    c.kind = CellKind::puct;
  } else if (base == "random") {
    c.kind = CellKind::random;
  } else {
    throw UsageError("unknown cell '" + token + "'");
  }
  return c;
}

std::vector<Cell> parse_cells(const std::string& list) {
  std::vector<Cell> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    out.push_back(parse_cell(item.substr(b, item.find_last_not_of(' ') - b + 1)));
  }
  if (out.empty()) throw UsageError("no cells given");
  return out;
}

Aggregate aggregate(const std::string& variant, const std::vector<CellResult>& rows) {
  Aggregate a;
  a.variant = variant;
  const auto mine = rows_of(variant, rows);
  a.seeds = mine.size();
  if (mine.empty()) return a;
  for (const auto* r : mine) {
    a.mean += r->eval.success_ratio;
    a.all_finite = a.all_finite && r->finite;
  }
  a.mean /= static_cast<double>(a.seeds);
  if (a.seeds > 1) {
    double ss = 0.0;
    for (const auto* r : mine) ss += (r->eval.success_ratio - a.mean) * (r->eval.success_ratio - a.mean);
    a.se = std::sqrt(ss / static_cast<double>(a.seeds - 1)) / std::sqrt(static_cast<double>(a.seeds));
  }
  return a;
}

double sign_test_p(std::size_t wins, std::size_t trials) {
  if (wins == 0) return 1.0;
  if (wins > trials) return 0.0;
  double p = 0.0;
  for (std::size_t k = wins; k <= trials; ++k) {
    const double log_c = std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0);
    p += std::exp(log_c - static_cast<double>(trials) * std::log(2.0));
  }
  return std::min(1.0, p);
}

Comparison compare(const std::string& a, const std::string& b, const std::vector<CellResult>& rows) {
  Comparison c;
  c.a = aggregate(a, rows);
  c.b = aggregate(b, rows);
  std::map<std::uint64_t, double> b_by_seed;
  for (const auto* r : rows_of(b, rows)) b_by_seed[r->seed] = r->eval.success_ratio;
  for (const auto* r : rows_of(a, rows)) {
    const auto it = b_by_seed.find(r->seed);
    if (it == b_by_seed.end()) continue;
    if (r->eval.success_ratio > it->second) ++c.wins;
    else if (r->eval.success_ratio < it->second) ++c.losses;
    else ++c.ties;
  }
  c.p_value = sign_test_p(c.wins, c.wins + c.losses);
  c.separated = c.a.mean - c.a.se > c.b.mean + c.b.se;
  c.better = c.separated || c.p_value < 0.05;
  const bool b_separated = c.b.mean - c.b.se > c.a.mean + c.a.se;
  const bool b_better = b_separated || sign_test_p(c.losses, c.wins + c.losses) < 0.05;
  c.meets = !b_better;
  return c;
}

void write_row(std::ostream& out, const CellResult& r) {
  out << r.variant << ',' << r.seed << ',' << fmt(r.eval.success_ratio) << ',' << fmt(binomial_se(r.eval)) << ','
      << r.eval.episodes << ',' << fmt(r.eval.interval.low) << ',' << fmt(r.eval.interval.high) << ','
      << fmt(r.final_loss) << ',' << (r.finite ? "true" : "false") << ',' << r.status << '\n';
}

void write_aggregate(std::ostream& out, const Aggregate& agg, const std::vector<CellResult>& rows) {
  std::size_t episodes = 0;
  double loss = 0.0;
  std::size_t failed = 0;
  const auto mine = rows_of(agg.variant, rows);
  for (const auto* r : mine) {
    episodes += r->eval.episodes;
    loss += r->final_loss;
    if (r->status != "ok") ++failed;
  }
  if (!mine.empty()) loss /= static_cast<double>(mine.size());
  out << agg.variant << ",mean," << fmt(agg.mean) << ',' << fmt(agg.se) << ',' << episodes << ','
      << fmt(agg.mean - agg.se) << ',' << fmt(agg.mean + agg.se) << ',' << fmt(loss) << ','
      << (agg.all_finite ? "true" : "false") << ',' << (failed == 0 ? "ok" : std::to_string(failed) + " failed")
      << '\n';
}

CompareReport run_compare(const RunConfig& config, const std::vector<train::LabeledExample>& data, std::ostream* csv,
                          std::ostream* log, const std::string& metrics_dir) {
  config.validate();
  const auto cells = parse_cells(config.cells);
  if (data.empty()) throw UsageError("compare needs a non-empty dataset");
  if (!metrics_dir.empty()) std::filesystem::create_directories(metrics_dir);
  if (csv) *csv << kCompareHeader << '\n' << std::flush;

  bool need_prior = false;
  for (const auto& c : cells) {
    net::SubnetConfig probe = config.net;
    probe.policy = c.policy;
    need_prior = need_prior || c.kind == CellKind::puct || (c.kind == CellKind::mctsnet && probe.uses_prior());
  }

  CompareReport report;
  for (const std::uint64_t seed : config.seeds) {
    const auto levels = make_levels(config.eval_episodes, config.board, derive(seed, 3));
    nn::ParamStore prior;
    if (need_prior) {
      std::mt19937_64 rng(derive(seed, 1));
      net::init_prior_params(prior, config.net, rng);
      const auto rep = train::train_policy_prior(prior, config.net, data, config.prior, rng);
      if (log) *log << "seed " << seed << " prior loss " << fmt(rep.loss) << " accuracy " << fmt(rep.accuracy) << '\n';
    }

    for (const auto& cell : cells) {
      CellResult row;
      row.variant = cell.name;
      row.seed = seed;
      try {
        switch (cell.kind) {
          case CellKind::random:
            row.eval = evaluate_agent(random_agent(derive(seed, 4)), levels);
            break;
          case CellKind::uct:
          case CellKind::puct: {
            baseline::SearchConfig search;
            search.c = config.uct_c;
            const int sims = cell.simulations.value_or(config.step.simulations);
            row.eval = evaluate_agent(cell.kind == CellKind::uct ? uct_agent(sims, search)
                                                                  : puct_agent(prior, config.net, sims, search),
                                      levels);
            break;
          }
          case CellKind::mctsnet: {
            train::TrainConfig tc = config.train_config(seed);
            tc.net.backup = cell.backup;
            tc.net.policy = cell.policy;
            tc.sham = cell.sham;
            tc.eval_every = 0;
            if (cell.simulations) tc.step.simulations = *cell.simulations;
            nn::ParamStore store;
            std::mt19937_64 rng(derive(seed, 2));
            net::init_params(store, tc.net, rng);
            for (const auto& [name, entry] : store.entries())
              if (prior.contains(name)) store.value(name) = prior.value(name);
            std::ofstream metrics;
            if (!metrics_dir.empty())
              metrics.open(std::filesystem::path(metrics_dir) / (cell.name + "_seed" + std::to_string(seed) + ".csv"));
            try {
              const auto summary = train::train_loop(tc, store, data, metrics.is_open() ? &metrics : nullptr);
              row.final_loss = summary.last_loss;
              row.finite = summary.finite;
            } catch (const NumericError& e) {
              row.finite = false;
              row.status = "diverged";
              if (log) *log << cell.name << " seed " << seed << " diverged: " << e.what() << '\n';
            }
            const net::EnvModel model{tc.sham, {}};
            row.eval = evaluate_agent(mctsnet_agent(store, tc.net, model, tc.step.simulations, derive(seed, 5)),
                                      levels);
            break;
          }
        }
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
        for (char& ch : row.status)
          if (ch == ',' || ch == '\n') ch = ';';
      }
      if (log)
        *log << cell.name << " seed " << seed << " success " << fmt(row.eval.success_ratio) << " loss "
             << fmt(row.final_loss) << ' ' << row.status << '\n'
             << std::flush;
      if (csv) write_row(*csv, row), csv->flush();
      report.rows.push_back(std::move(row));
    }
  }
  for (const auto& cell : cells) {
    report.aggregates.push_back(aggregate(cell.name, report.rows));
    if (csv) write_aggregate(*csv, report.aggregates.back(), report.rows);
  }
  return report;
}

}  // namespace mctsnet::harness
