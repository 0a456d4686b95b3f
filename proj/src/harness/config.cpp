#include "mctsnet/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "mctsnet/errors.hpp"

namespace mctsnet::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw UsageError("bad value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("bad value '" + value + "' for " + key);
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(line_no) + " has no '='");
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  return parse_key_values(in);
}

net::SubnetConfig RunConfig::desk_network() {
  net::SubnetConfig c;
  c.board_width = 7;
  c.board_height = 7;
  c.n = 32;
  c.embed_channels = 16;
  c.embed_blocks = 1;
  c.embed_reduced = 8;
  c.readout_hidden = 64;
  c.backup_hidden = 64;
  c.simpol_hidden = 32;
  c.prior_channels = 16;
  c.prior_blocks = 1;
  c.prior_reduced = 4;
  return c;
}

train::StepConfig RunConfig::desk_step() {
  train::StepConfig s;
  s.simulations = 5;
  s.learning_rate = 0.01;
  return s;
}

train::TrainConfig RunConfig::train_config(std::uint64_t seed) const {
  train::TrainConfig t;
  t.net = net;
  t.step = step;
  t.sham = sham;
  t.batch = batch;
  t.steps = steps;
  t.log_every = log_every;
  t.eval_every = eval_every;
  t.checkpoint_every = checkpoint_every;
  t.baseline_decay = baseline_decay;
  t.seed = seed;
  return t;
}

void RunConfig::validate() const {
  net.validate();
  step.credit.validate();
  if (board.width != net.board_width || board.height != net.board_height)
    throw UsageError("board size and network board size differ");
  if (seeds.empty()) throw UsageError("at least one seed is required");
  train_config(seeds.front()).validate();
}

void apply_settings(RunConfig& c, const KeyValues& values) {
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto size = [](std::size_t& field) { return Setter([&field](auto& k, auto& v) { field = parse_number<std::size_t>(k, v); }); };
  auto integer = [](auto& field) {
    return Setter([&field](auto& k, auto& v) { field = parse_number<std::remove_reference_t<decltype(field)>>(k, v); });
  };
  auto real = [](double& field) { return Setter([&field](auto& k, auto& v) { field = parse_number<double>(k, v); }); };
  const std::map<std::string, Setter> setters{
      {"board_width", [&](auto& k, auto& v) { c.board.width = c.net.board_width = parse_number<int>(k, v); }},
      {"board_height", [&](auto& k, auto& v) { c.board.height = c.net.board_height = parse_number<int>(k, v); }},
      {"boxes", integer(c.board.boxes)},
      {"simulations", integer(c.step.simulations)},
      {"min_simulations", integer(c.step.min_simulations)},
      {"baseline_decay", real(c.baseline_decay)},
      {"estimator", [&](auto&, auto& v) { c.step.credit.estimator = train::parse_estimator(v); }},
      {"gamma", real(c.step.credit.gamma)},
      {"entropy_coeff", real(c.step.credit.entropy_coeff)},
      {"learning_rate", real(c.step.learning_rate)},
      {"workers", integer(c.step.workers)},
      {"backup", [&](auto&, auto& v) { c.net.backup = net::parse_backup_kind(v); }},
      {"policy", [&](auto&, auto& v) { c.net.policy = net::parse_policy_kind(v); }},
      {"model",
       [&](auto& k, auto& v) {
         if (v != "real" && v != "sham") throw UsageError("bad value '" + v + "' for " + k);
         c.sham = v == "sham";
       }},
      {"sham", [&](auto& k, auto& v) { c.sham = parse_bool(k, v); }},
      {"batch", integer(c.batch)},
      {"steps", integer(c.steps)},
      {"log_every", integer(c.log_every)},
      {"eval_every", integer(c.eval_every)},
      {"checkpoint_every", integer(c.checkpoint_every)},
      {"eval_episodes", size(c.eval_episodes)},
      {"seeds",
       [&](auto& k, auto& v) {
         c.seeds.clear();
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) c.seeds.push_back(parse_number<std::uint64_t>(k, trim(item)));
       }},
      {"oracle_budget", size(c.oracle_budget)},
      {"dataset_examples", size(c.dataset_examples)},
      {"levels", size(c.levels)},
      {"n", size(c.net.n)},
      {"embed_channels", size(c.net.embed_channels)},
      {"embed_blocks", size(c.net.embed_blocks)},
      {"embed_reduced", size(c.net.embed_reduced)},
      {"readout_hidden", size(c.net.readout_hidden)},
      {"backup_hidden", size(c.net.backup_hidden)},
      {"simpol_hidden", size(c.net.simpol_hidden)},
      {"prior_channels", size(c.net.prior_channels)},
      {"prior_blocks", size(c.net.prior_blocks)},
      {"prior_reduced", size(c.net.prior_reduced)},
      {"prior_epochs", integer(c.prior.epochs)},
      {"prior_learning_rate", real(c.prior.learning_rate)},
      {"prior_entropy_coeff", real(c.prior.entropy_coeff)},
      {"uct_c", real(c.uct_c)},
      {"cells", [&](auto&, auto& v) { c.cells = v; }},
      {"dataset", [&](auto&, auto& v) { c.dataset = v; }},
  };
  for (const auto& [key, value] : values) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw UsageError("unknown config key '" + key + "'");
    it->second(key, value);
  }
}

std::string describe(const RunConfig& c) {
  std::ostringstream o;
  std::string seeds;
  for (auto s : c.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  o << "board_width = " << c.board.width << "\nboard_height = " << c.board.height << "\nboxes = " << c.board.boxes
    << "\nsimulations = " << c.step.simulations
    << "\nmin_simulations = " << c.step.min_simulations << "\nbaseline_decay = " << fmt(c.baseline_decay) << "\nestimator = " << train::estimator_name(c.step.credit.estimator)
    << "\ngamma = " << fmt(c.step.credit.gamma) << "\nentropy_coeff = " << fmt(c.step.credit.entropy_coeff)
    << "\nlearning_rate = " << fmt(c.step.learning_rate) << "\nworkers = " << c.step.workers
    << "\nbackup = " << net::backup_kind_name(c.net.backup) << "\npolicy = " << net::policy_kind_name(c.net.policy)
    << "\nmodel = " << (c.sham ? "sham" : "real") << "\nbatch = " << c.batch << "\nsteps = " << c.steps
    << "\nlog_every = " << c.log_every << "\neval_every = " << c.eval_every
    << "\ncheckpoint_every = " << c.checkpoint_every << "\neval_episodes = " << c.eval_episodes
    << "\nseeds = " << seeds << "\noracle_budget = " << c.oracle_budget << "\ndataset_examples = " << c.dataset_examples
    << "\nlevels = " << c.levels << "\nn = " << c.net.n << "\nembed_channels = " << c.net.embed_channels
    << "\nembed_blocks = " << c.net.embed_blocks << "\nembed_reduced = " << c.net.embed_reduced
    << "\nreadout_hidden = " << c.net.readout_hidden << "\nbackup_hidden = " << c.net.backup_hidden
    << "\nsimpol_hidden = " << c.net.simpol_hidden << "\nprior_channels = " << c.net.prior_channels
    << "\nprior_blocks = " << c.net.prior_blocks << "\nprior_reduced = " << c.net.prior_reduced
    << "\nprior_epochs = " << c.prior.epochs << "\nprior_learning_rate = " << fmt(c.prior.learning_rate)
    << "\nprior_entropy_coeff = " << fmt(c.prior.entropy_coeff) << "\nuct_c = " << fmt(c.uct_c)
    << "\ncells = " << c.cells << '\n';
  if (!c.dataset.empty()) o << "dataset = " << c.dataset << '\n';
  return o.str();
}

}  // namespace mctsnet::harness
