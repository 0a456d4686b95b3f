#include "mctsnet/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <thread>

#include "mctsnet/errors.hpp"
#include "mctsnet/nn/checkpoint.hpp"
#include "mctsnet/nn/ops.hpp"

namespace mctsnet::train {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void scale_into(Gradients& dst, const Gradients& src, double factor) {
  for (const auto& [name, g] : src) {
    auto it = dst.find(name);
    if (it == dst.end()) it = dst.emplace(name, nn::Tensor(g.shape(), 0.0)).first;
    auto out = it->second.values();
    const auto in = g.values();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] += factor * in[i];
  }
}

}  // namespace

StepMetrics example_gradient(const ParamStore& store, const net::SubnetConfig& config, const LabeledExample& example,
                             const net::EnvModel& env, const StepConfig& step, std::uint64_t seed, Gradients& sink) {
  std::mt19937_64 rng(seed);
  int simulations = step.simulations;
  if (step.min_simulations > 0)
    simulations = std::uniform_int_distribution<int>(step.min_simulations, step.simulations)(rng);
  Graph g(store, sink);
  const ExampleLoss ex = loss_and_traces(g, config, example, simulations, env, rng);
  const Surrogate s = build_surrogate(g, ex, step.credit);
  g.backward(s.objective);
  StepMetrics m;
  m.loss = ex.value;
  m.per_sim = ex.per_sim;
  m.per_sim.resize(static_cast<std::size_t>(step.simulations), ex.value);
  m.entropy = s.entropy;
  m.score_weight = s.score_weight;
  return m;
}

StepMetrics gradient_step(ParamStore& store, const net::SubnetConfig& config,
                          std::span<const LabeledExample* const> batch, const net::EnvModel& env,
                          const StepConfig& step, std::mt19937_64& rng) {
  if (batch.empty()) throw UsageError("empty batch");
  step.credit.validate();
  std::vector<std::uint64_t> seeds(batch.size());
  for (auto& s : seeds) s = rng();
  std::vector<Gradients> sinks(batch.size());
  std::vector<StepMetrics> metrics(batch.size());
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(step.workers, 1)), 1, batch.size());
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < batch.size(); i += workers)
      metrics[i] = example_gradient(store, config, *batch[i], env, step, seeds[i], sinks[i]);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
  }

  Gradients total;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& sink : sinks) scale_into(total, sink, inv);
  store.accumulate(total);

  StepMetrics out;
  out.per_sim.assign(static_cast<std::size_t>(step.simulations), 0.0);
  for (const auto& m : metrics) {
    out.loss += m.loss * inv;
    out.entropy += m.entropy * inv;
    out.score_weight += m.score_weight * inv;
    for (std::size_t k = 0; k < m.per_sim.size(); ++k) out.per_sim[k] += m.per_sim[k] * inv;
  }
  out.grad_norm = store.grad_norm();
  nn::sgd_step(store, step.learning_rate);
  return out;
}

PriorReport evaluate_prior(const ParamStore& store, const net::SubnetConfig& config,
                           const std::vector<LabeledExample>& data) {
  PriorReport r;
  if (data.empty()) return r;
  std::size_t correct = 0;
  for (const auto& e : data) {
    Gradients sink;
    Graph g(store, sink);
    const Var logits = net::prior_logits(g, config, e.state);
    const auto label = static_cast<std::size_t>(sokoban::index(e.label));
    r.loss += g.value(nn::softmax_xent(g, logits, label).loss)[0];
    const auto v = g.value(logits).values();
    if (static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin()) == label) ++correct;
  }
  r.loss /= static_cast<double>(data.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return r;
}

PriorReport train_policy_prior(ParamStore& store, const net::SubnetConfig& config,
                               const std::vector<LabeledExample>& data, const PriorTrainConfig& options,
                               std::mt19937_64& rng) {
  if (data.empty()) throw UsageError("policy prior needs a non-empty dataset");
  const long saved_step = store.step();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      Graph g(store);
      const Var logits = net::prior_logits(g, config, data[i].state);
      Var loss = nn::softmax_xent(g, logits, static_cast<std::size_t>(sokoban::index(data[i].label))).loss;
      if (options.entropy_coeff > 0.0) loss = nn::add(g, loss, nn::scale(g, nn::entropy(g, logits), -options.entropy_coeff));
      g.backward(loss);
      nn::sgd_step(store, options.learning_rate);
    }
  }
  store.set_step(saved_step);
  return evaluate_prior(store, config, data);
}

void TrainConfig::validate() const {
  net.validate();
  step.credit.validate();
  if (step.simulations < 1) throw UsageError("simulations must be at least 1");
  if (batch < 1) throw UsageError("batch must be at least 1");
  if (steps < 0) throw UsageError("steps must be non-negative");
  if (log_every < 1) throw UsageError("log_every must be at least 1");
  if (eval_every < 0 || (eval_every > 0 && eval_every % log_every != 0))
    throw UsageError("eval_every must be a multiple of log_every");
  if (!(step.learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (step.min_simulations < 0 || step.min_simulations > step.simulations)
    throw UsageError("min_simulations must lie in [0, simulations]");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw UsageError("baseline_decay must lie in [0, 1)");
}

std::string metrics_header(int simulations) {
  std::string h = "step,loss";
  for (int m = 1; m <= simulations; ++m) h += ",l_" + std::to_string(m);
  return h + ",success_ratio,grad_norm,entropy";
}

TrainSummary train_loop(const TrainConfig& config, ParamStore& store, const std::vector<LabeledExample>& data,
                        std::ostream* metrics, const std::function<double(const ParamStore&)>& evaluate) {
  config.validate();
  if (data.empty()) throw UsageError("training needs a non-empty dataset");
  if (config.net.policy == net::PolicyKind::distilled) store.set_trainable("prior.", false);
  const net::EnvModel env{config.sham};
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  if (metrics) *metrics << metrics_header(config.step.simulations) << '\n';
  TrainSummary summary;
  StepMetrics window;
  window.per_sim.assign(static_cast<std::size_t>(config.step.simulations), 0.0);
  long in_window = 0;
  std::vector<const LabeledExample*> batch;
  const long first = store.step();
  StepConfig step_config = config.step;
  bool baseline_started = false;
  for (long k = 0; k < config.steps; ++k) {
    batch.clear();
    for (int b = 0; b < config.batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(&data[order[cursor++]]);
    }
    const StepMetrics m = gradient_step(store, config.net, batch, env, step_config, rng);
    if (!std::isfinite(m.loss)) summary.finite = false;
    if (config.baseline_decay > 0.0) {
      double& b = step_config.credit.baseline;
      b = baseline_started ? config.baseline_decay * b + (1.0 - config.baseline_decay) * m.loss : m.loss;
      baseline_started = true;
    }
    window.loss += m.loss;
    window.grad_norm += m.grad_norm;
    window.entropy += m.entropy;
    for (std::size_t i = 0; i < m.per_sim.size(); ++i) window.per_sim[i] += m.per_sim[i];
    ++in_window;

    const long step = store.step();
    const bool last = k + 1 == config.steps;
    if (step % config.log_every == 0 || last) {
      const double inv = 1.0 / static_cast<double>(in_window);
      std::optional<double> success;
      if (evaluate && config.eval_every > 0 && step % config.eval_every == 0) success = evaluate(store);
      if (metrics) {
        *metrics << step << ',' << fmt(window.loss * inv);
        for (double l : window.per_sim) *metrics << ',' << fmt(l * inv);
        *metrics << ',' << (success ? fmt(*success) : "") << ',' << fmt(window.grad_norm * inv) << ','
                 << fmt(window.entropy * inv) << '\n';
      }
      summary.last_loss = window.loss * inv;
      if (success) summary.last_success = success;
      window = StepMetrics{};
      window.per_sim.assign(static_cast<std::size_t>(config.step.simulations), 0.0);
      in_window = 0;
    }
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0 && !config.checkpoint_dir.empty()) {
      std::filesystem::create_directories(config.checkpoint_dir);
      nn::save_checkpoint(config.checkpoint_dir + "/checkpoint_" + std::to_string(step) + ".bin", store);
    }
  }
  summary.steps = store.step() - first;
  return summary;
}

}  // namespace mctsnet::train
