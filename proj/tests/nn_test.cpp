#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mctsnet/errors.hpp"
#include "mctsnet/nn/checkpoint.hpp"
#include "mctsnet/nn/grad_check.hpp"
#include "mctsnet/nn/ops.hpp"

using namespace mctsnet;
using namespace mctsnet::nn;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

// Independent reference: plain triple loop.
std::vector<double> naive_linear(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t batch) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  std::vector<double> y(batch * out);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += x[r * in + i] * w[i * out + o];
      y[r * out + o] = acc;
    }
  return y;
}

// Independent reference: direct 6-deep loop cross-correlation, zero padding 1.
std::vector<double> naive_conv3x3(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3), cout = w.dim(0);
  std::vector<double> y(batch * cout * h * wd);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < wd; ++j) {
          double acc = b[co];
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (int di = -1; di <= 1; ++di)
              for (int dj = -1; dj <= 1; ++dj) {
                const long si = static_cast<long>(i) + di, sj = static_cast<long>(j) + dj;
                if (si < 0 || sj < 0 || si >= static_cast<long>(h) || sj >= static_cast<long>(wd)) continue;
                acc += w[((co * cin + ci) * 3 + static_cast<std::size_t>(di + 1)) * 3 + static_cast<std::size_t>(dj + 1)] *
                       x[((n * cin + ci) * h + static_cast<std::size_t>(si)) * wd + static_cast<std::size_t>(sj)];
              }
          y[((n * cout + co) * h + i) * wd + j] = acc;
        }
  return y;
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.all_finite());
  t[4] = std::nan("");
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(t.validate("probe"), NumericError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
}

TEST_CASE("linear") {
  ParamStore store;
  SUBCASE("identity weights") {
    store.add("l.W", Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    store.add_zeros("l.b", {3});
    Graph g(store);
    auto y = linear(g, g.constant(Tensor::vector({1, 2, 3})), "l");
    CHECK(g.value(y).storage() == std::vector<double>{1, 2, 3});
  }
  SUBCASE("zero weights") {
    store.add_zeros("l.W", {4, 2});
    store.add("l.b", Tensor::vector({5, 5}));
    Graph g(store);
    auto y = linear(g, g.constant(Tensor::vector({3, -1, 7, 2})), "l");
    CHECK(g.value(y).storage() == std::vector<double>{5, 5});
  }
  SUBCASE("random against triple loop") {
    std::mt19937_64 rng(11);
    store.add("l.W", random_tensor({4, 3}, rng));
    store.add("l.b", random_tensor({3}, rng));
    const Tensor x = random_tensor({5, 4}, rng);
    Graph g(store);
    auto y = linear(g, g.constant(x), "l");
    const auto expect = naive_linear(x, store.value("l.W"), store.value("l.b"), 5);
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CHECK(std::abs(g.value(y)[i] - expect[i]) <= 1e-12 * std::max(1.0, std::abs(expect[i])));
    }
  }
  SUBCASE("shape mismatch names both shapes") {
    store.add_zeros("l.W", {4, 2});
    store.add_zeros("l.b", {2});
    Graph g(store);
    try {
      linear(g, g.constant(Tensor::vector({1, 2, 3})), "l");
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[3]") != std::string::npos);
      CHECK(msg.find("[4x2]") != std::string::npos);
    }
  }
}

TEST_CASE("conv3x3") {
  ParamStore store;
  std::mt19937_64 rng(5);
  SUBCASE("centered delta kernel is identity") {
    Tensor k({2, 2, 3, 3}, 0.0);
    for (std::size_t c = 0; c < 2; ++c) k[((c * 2 + c) * 3 + 1) * 3 + 1] = 1.0;
    store.add("c.W", k);
    store.add_zeros("c.b", {2});
    const Tensor x = random_tensor({1, 2, 4, 5}, rng);
    Graph g(store);
    auto y = conv3x3(g, g.constant(x), "c");
    CHECK(g.value(y) == x);
  }
  SUBCASE("zero kernel yields bias") {
    store.add_zeros("c.W", {3, 2, 3, 3});
    store.add("c.b", Tensor::vector({0.5, 0.5, 0.5}));
    Graph g(store);
    auto y = conv3x3(g, g.constant(random_tensor({1, 2, 4, 4}, rng)), "c");
    for (double v : g.value(y).values()) CHECK(v == 0.5);
  }
  SUBCASE("random against nested loops") {
    store.add("c.W", random_tensor({3, 2, 3, 3}, rng));
    store.add("c.b", random_tensor({3}, rng));
    const Tensor x = random_tensor({1, 2, 4, 4}, rng);
    Graph g(store);
    auto y = conv3x3(g, g.constant(x), "c");
    const auto expect = naive_conv3x3(x, store.value("c.W"), store.value("c.b"));
    REQUIRE(expect.size() == g.value(y).size());
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(g.value(y)[i] - expect[i]) <= 1e-12);
  }
  SUBCASE("channel mismatch") {
    store.add_zeros("c.W", {3, 2, 3, 3});
    store.add_zeros("c.b", {3});
    Graph g(store);
    CHECK_THROWS_AS(conv3x3(g, g.constant(Tensor({1, 4, 3, 3})), "c"), DimensionError);
  }
}

TEST_CASE("pointwise") {
  ParamStore store;
  Graph g(store);
  CHECK(g.value(relu(g, g.constant(Tensor::vector({-1, 0, 2})))).storage() == std::vector<double>{0, 0, 2});
  CHECK(g.value(sigmoid(g, g.constant(Tensor::vector({0})))).item() == 0.5);

  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({100}, rng, -4, 4);
  auto t = g.value(tanh(g, g.constant(x)));
  for (std::size_t i = 0; i < 100; ++i) {
    const double e = (std::exp(x[i]) - std::exp(-x[i])) / (std::exp(x[i]) + std::exp(-x[i]));
    CHECK(std::abs(t[i] - e) <= 1e-12);
  }
  auto s = g.value(sigmoid(g, g.constant(x)));
  for (double v : s.values()) CHECK((v > 0.0 && v < 1.0));
  CHECK_THROWS_AS(parse_pointwise("gelu"), UsageError);
  CHECK(parse_pointwise("tanh") == Pointwise::tanh);
}

TEST_CASE("softmax_xent") {
  ParamStore store;
  SUBCASE("uniform logits") {
    Graph g(store);
    auto r = softmax_xent(g, g.constant(Tensor::vector({0.3, 0.3, 0.3, 0.3})), 2);
    CHECK(g.value(r.loss).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(g.value(r.loss).item() == doctest::Approx(1.3862944).epsilon(1e-7));
  }
  SUBCASE("saturated") {
    Graph g(store);
    auto r = softmax_xent(g, g.constant(Tensor::vector({100, 0, 0, 0})), 0);
    CHECK(g.value(r.loss).item() < 1e-10);
    CHECK(g.value(r.loss).item() >= 0.0);
  }
  SUBCASE("label out of range") {
    Graph g(store);
    CHECK_THROWS_AS(softmax_xent(g, g.constant(Tensor::vector({1, 2, 3, 4})), 4), UsageError);
  }
  SUBCASE("gradient is probs minus one-hot, matching finite differences") {
    std::mt19937_64 rng(9);
    const Tensor logits = random_tensor({4}, rng, -3, 3);
    Graph g(store);
    auto lv = g.constant(logits);
    auto r = softmax_xent(g, lv, 1);
    double total = 0.0;
    for (double p : r.probs.values()) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-9);
    g.backward(r.loss);
    const Tensor grad = g.grad(lv);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(grad[i] == doctest::Approx(r.probs[i] - (i == 1 ? 1.0 : 0.0)).epsilon(1e-12));
      auto loss_at = [&](double delta) {
        Tensor l = logits;
        l[i] += delta;
        Graph gg(store);
        return gg.value(softmax_xent(gg, gg.constant(l), 1).loss).item();
      };
      const double fd = (loss_at(1e-5) - loss_at(-1e-5)) / 2e-5;
      CHECK(relative_error(grad[i], fd) < 1e-7);
    }
  }
}

TEST_CASE("log_softmax and softmax rows sum to one") {
  ParamStore store;
  Graph g(store);
  std::mt19937_64 rng(2);
  auto x = g.constant(random_tensor({3, 5}, rng, -20, 20));
  auto p = g.value(softmax(g, x));
  auto lp = g.value(log_softmax(g, x));
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      s += p[r * 5 + i];
      s2 += std::exp(lp[r * 5 + i]);
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
    CHECK(std::abs(s2 - 1.0) <= 1e-9);
  }
}

TEST_CASE("backward") {
  std::mt19937_64 rng(4);
  ParamStore store;
  store.add("l.W", random_tensor({3, 2}, rng));
  store.add("l.b", random_tensor({2}, rng));
  const Tensor x = Tensor::vector({0.5, -1.0, 2.0});

  SUBCASE("sum of linear gives outer-product structure") {
    Graph g(store);
    g.backward(sum(g, linear(g, g.constant(x), "l")));
    const Tensor& dw = store.grad("l.W");
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t o = 0; o < 2; ++o) CHECK(dw[i * 2 + o] == x[i]);
    CHECK(store.grad("l.b").storage() == std::vector<double>{1, 1});
  }
  SUBCASE("non-scalar loss and second call are usage errors") {
    Graph g(store);
    auto y = linear(g, g.constant(x), "l");
    CHECK_THROWS_AS(g.backward(y), UsageError);
    auto loss = sum(g, y);
    g.backward(loss);
    CHECK_THROWS_AS(g.backward(loss), UsageError);
  }
  SUBCASE("two graphs accumulate additively") {
    auto run = [&](const Tensor& input) {
      Graph g(store);
      g.backward(sum(g, tanh(g, linear(g, g.constant(input), "l"))));
    };
    const Tensor x2 = Tensor::vector({1.0, 0.25, -0.75});
    run(x);
    const Tensor first = store.grad("l.W");
    store.zero_grad();
    run(x2);
    const Tensor second = store.grad("l.W");
    store.zero_grad();
    run(x);
    run(x2);
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(store.grad("l.W")[i] == doctest::Approx(first[i] + second[i]).epsilon(1e-12));

    // Reverse order agrees within 1e-9 relative.
    const Tensor forward_order = store.grad("l.W");
    store.zero_grad();
    run(x2);
    run(x);
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(relative_error(store.grad("l.W")[i], forward_order[i]) <= 1e-9);
  }
  SUBCASE("unreachable parameters keep zero gradient") {
    store.add("other.W", random_tensor({3, 2}, rng));
    store.add("other.b", random_tensor({2}, rng));
    Graph g(store);
    auto used = sum(g, linear(g, g.constant(x), "l"));
    linear(g, g.constant(x), "other");
    g.backward(used);
    for (double v : store.grad("other.W").values()) CHECK(v == 0.0);
    for (double v : store.grad("other.b").values()) CHECK(v == 0.0);
  }
  SUBCASE("gradient sink leaves the store untouched") {
    Gradients sink;
    Graph g(static_cast<const ParamStore&>(store), sink);
    g.backward(sum(g, linear(g, g.constant(x), "l")));
    CHECK(sink.count("l.W") == 1);
    for (double v : store.grad("l.W").values()) CHECK(v == 0.0);
    store.accumulate(sink);
    CHECK(store.grad("l.W")[0] == x[0]);
  }
}

TEST_CASE("sgd_step") {
  ParamStore store;
  store.add("p", Tensor::vector({1.0}));
  SUBCASE("zero gradient leaves parameters") {
    sgd_step(store, 0.1);
    CHECK(store.value("p")[0] == 1.0);
    CHECK(store.step() == 1);
  }
  SUBCASE("arithmetic") {
    store.grad("p")[0] = 2.0;
    sgd_step(store, 0.1);
    CHECK(store.value("p")[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(store.grad("p")[0] == 0.0);
  }
  SUBCASE("quadratic follows 0.9^k") {
    for (int k = 1; k <= 30; ++k) {
      Graph g(store);
      auto p = g.param("p");
      g.backward(scale(g, sum(g, mul(g, p, p)), 0.5));
      sgd_step(store, 0.1);
      CHECK(store.value("p")[0] == doctest::Approx(std::pow(0.9, k)).epsilon(1e-12));
    }
  }
  SUBCASE("NaN gradient aborts naming the parameter") {
    store.grad("p")[0] = std::nan("");
    try {
      sgd_step(store, 0.1);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("p") != std::string::npos);
    }
    CHECK(store.value("p")[0] == 1.0);
  }
  CHECK_THROWS_AS(sgd_step(store, 0.0), UsageError);
}

TEST_CASE("grad_check") {
  std::mt19937_64 rng(8);
  ParamStore store;
  store.add("l.W", random_tensor({4, 3}, rng));
  store.add("l.b", random_tensor({3}, rng));
  const Tensor x = random_tensor({2, 4}, rng);

  SUBCASE("linear layer alone") {
    auto report = grad_check(store, [&](Graph& g) { return sum(g, mul(g, linear(g, g.constant(x), "l"), linear(g, g.constant(x), "l"))); },
                             {.tolerance = 1e-7, .samples = 0});
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-7);
    CHECK(report.checked == 15);
  }
  SUBCASE("conv + relu stack") {
    store.add("c.W", random_tensor({2, 1, 3, 3}, rng));
    store.add("c.b", random_tensor({2}, rng));
    const Tensor img = random_tensor({1, 1, 3, 3}, rng);
    auto report = grad_check(store, [&](Graph& g) {
      auto y = relu(g, conv3x3(g, g.constant(img), "c"));
      return sum(g, sigmoid(g, y));
    }, {.tolerance = 1e-6, .samples = 0, .prefixes = {"c."}});
    CHECK(report.passed);
  }
  SUBCASE("sabotaged backward rule is caught") {
    auto broken_square = [](Graph& g, Var v) {
      Tensor y = g.value(v);
      for (auto& e : y.values()) e = e * e;
      return g.record(OpTag::custom, {v}, std::move(y), [v](Graph& gr, const Tensor& dy) {
        const Tensor& xv = gr.value(v);
        Tensor& dx = gr.grad_buffer(v);
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * xv[i];  // should be 2*x
      });
    };
    auto report = grad_check(store, [&](Graph& g) { return sum(g, broken_square(g, linear(g, g.constant(x), "l"))); },
                             {.tolerance = 1e-4, .samples = 0});
    CHECK_FALSE(report.passed);
    CHECK(report.max_rel_error > 1e-2);
  }
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(1);
  ParamStore store;
  store.add("zeta.W", random_tensor({2, 3}, rng));
  store.add("alpha.b", random_tensor({4}, rng));
  store.add("nu.k", random_tensor({2, 1, 3, 3}, rng));
  store.set_step(1234);

  std::stringstream buf;
  write_checkpoint(buf, store);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 8) == "MCTSNET1");
  // Entries are ordered lexicographically: alpha.b precedes meta.step precedes nu.k.
  CHECK(bytes.find("alpha.b") < bytes.find("meta.step"));
  CHECK(bytes.find("meta.step") < bytes.find("nu.k"));
  CHECK(bytes.find("nu.k") < bytes.find("zeta.W"));

  const ParamStore loaded = read_checkpoint(buf);
  CHECK(loaded.step() == 1234);
  CHECK(loaded.names() == store.names());
  for (const auto& name : store.names()) CHECK(loaded.value(name) == store.value(name));

  std::stringstream again;
  write_checkpoint(again, loaded);
  CHECK(again.str() == bytes);

  std::stringstream bad("NOTMAGIC");
  CHECK_THROWS_AS(read_checkpoint(bad), IoError);
}
