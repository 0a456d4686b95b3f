#include "mctsnet/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "mctsnet/errors.hpp"

namespace mctsnet::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;
using MapVec = Eigen::Map<Eigen::VectorXd>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  MapVec(dst.data(), static_cast<Eigen::Index>(dst.size())) +=
      ConstMapVec(src.data(), static_cast<Eigen::Index>(src.size()));
}

// Columns of a stride-1, zero-padded patch matrix: [C*k*k × H*W].
void im2col(const double* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k, double* cols) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = h * w;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols + ((ci * k + ky) * k + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const auto sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const auto sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
            const bool inside = sy >= 0 && sx >= 0 && sy < static_cast<std::ptrdiff_t>(h) &&
                                sx < static_cast<std::ptrdiff_t>(w);
            row[y * w + xx] = inside ? x[(ci * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t k, double* dx) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = h * w;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = cols + ((ci * k + ky) * k + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const auto sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const auto sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            dx[(ci * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)] += row[y * w + xx];
          }
        }
      }
    }
  }
}

double stable_log_sum_exp(const double* x, std::size_t n) {
  const double mx = *std::max_element(x, x + n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - mx);
  return mx + std::log(s);
}

std::pair<std::size_t, std::size_t> rows_cols(const Tensor& t, const char* op) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw DimensionError(std::string(op) + ": expected [K] or [B×K], got " + shape_string(t.shape()));
}

}  // namespace

Pointwise parse_pointwise(std::string_view kind) {
  if (kind == "relu") return Pointwise::relu;
  if (kind == "sigmoid") return Pointwise::sigmoid;
  if (kind == "tanh") return Pointwise::tanh;
  throw UsageError("unknown pointwise kind: " + std::string(kind));
}

Var linear(Graph& g, Var x, const std::string& name) {
  const Var wv = g.param(name + ".W");
  const Var bv = g.param(name + ".b");
  const Tensor& xt = g.value(x);
  const Tensor& wt = g.value(wv);
  const Tensor& bt = g.value(bv);
  if (wt.rank() != 2 || bt.rank() != 1 || bt.dim(0) != wt.dim(1)) {
    throw DimensionError(name + ": malformed parameters W" + shape_string(wt.shape()) + " b" +
                         shape_string(bt.shape()));
  }
  const std::size_t in = wt.dim(0);
  const std::size_t out = wt.dim(1);
  std::size_t batch = 0;
  if (xt.rank() == 1 && xt.dim(0) == in) {
    batch = 1;
  } else if (xt.rank() == 2 && xt.dim(1) == in) {
    batch = xt.dim(0);
  } else {
    throw DimensionError(name + ": input " + shape_string(xt.shape()) + " does not match W" +
                         shape_string(wt.shape()));
  }
  const auto B = static_cast<Eigen::Index>(batch);
  const auto I = static_cast<Eigen::Index>(in);
  const auto O = static_cast<Eigen::Index>(out);

  Tensor y(xt.rank() == 1 ? Shape{out} : Shape{batch, out});
  MapMat ym(y.data(), B, O);
  ym.noalias() = ConstMapMat(xt.data(), B, I) * ConstMapMat(wt.data(), I, O);
  ym.rowwise() += ConstMapVec(bt.data(), O).transpose();

  return g.record(OpTag::linear, {x, wv, bv}, std::move(y), [x, wv, bv, B, I, O](Graph& gr, const Tensor& dy) {
    ConstMapMat dym(dy.data(), B, O);
    ConstMapMat xm(gr.value(x).data(), B, I);
    ConstMapMat wm(gr.value(wv).data(), I, O);
    MapMat(gr.grad_buffer(x).data(), B, I).noalias() += dym * wm.transpose();
    MapMat(gr.grad_buffer(wv).data(), I, O).noalias() += xm.transpose() * dym;
    MapVec(gr.grad_buffer(bv).data(), O) += dym.colwise().sum().transpose();
  });
}

Var conv2d(Graph& g, Var x, const std::string& name) {
  const Var wv = g.param(name + ".W");
  const Var bv = g.param(name + ".b");
  const Tensor& xt = g.value(x);
  const Tensor& wt = g.value(wv);
  const Tensor& bt = g.value(bv);
  if (wt.rank() != 4 || wt.dim(2) != wt.dim(3) || wt.dim(2) % 2 == 0 || bt.rank() != 1 ||
      bt.dim(0) != wt.dim(0)) {
    throw DimensionError(name + ": malformed kernel " + shape_string(wt.shape()) + " bias " +
                         shape_string(bt.shape()));
  }
  std::size_t batch = 1;
  std::size_t base = 0;
  if (xt.rank() == 4) {
    batch = xt.dim(0);
    base = 1;
  } else if (xt.rank() != 3) {
    throw DimensionError(name + ": expected [C×H×W] or [B×C×H×W], got " + shape_string(xt.shape()));
  }
  const std::size_t cin = xt.dim(base);
  const std::size_t h = xt.dim(base + 1);
  const std::size_t w = xt.dim(base + 2);
  const std::size_t cout = wt.dim(0);
  const std::size_t k = wt.dim(2);
  if (wt.dim(1) != cin) {
    throw DimensionError(name + ": input channels " + std::to_string(cin) + " (input " + shape_string(xt.shape()) +
                         ") do not match kernel " + shape_string(wt.shape()));
  }
  const std::size_t hw = h * w;
  const std::size_t patch = cin * k * k;
  auto cols = std::make_shared<std::vector<double>>(batch * patch * hw);

  Shape out_shape = xt.rank() == 4 ? Shape{batch, cout, h, w} : Shape{cout, h, w};
  Tensor y(out_shape);
  ConstMapMat wm(wt.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
  for (std::size_t b = 0; b < batch; ++b) {
    double* cb = cols->data() + b * patch * hw;
    im2col(xt.data() + b * cin * hw, cin, h, w, k, cb);
    MapMat ym(y.data() + b * cout * hw, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(hw));
    ym.noalias() = wm * ConstMapMat(cb, static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(hw));
    ym.colwise() += ConstMapVec(bt.data(), static_cast<Eigen::Index>(cout));
  }

  return g.record(OpTag::conv2d, {x, wv, bv}, std::move(y),
                  [x, wv, bv, cols, batch, cin, cout, h, w, k, hw, patch](Graph& gr, const Tensor& dy) {
                    const auto P = static_cast<Eigen::Index>(patch);
                    const auto HW = static_cast<Eigen::Index>(hw);
                    const auto CO = static_cast<Eigen::Index>(cout);
                    ConstMapMat wm(gr.value(wv).data(), CO, P);
                    MapMat dw(gr.grad_buffer(wv).data(), CO, P);
                    MapVec db(gr.grad_buffer(bv).data(), CO);
                    Tensor& dx = gr.grad_buffer(x);
                    std::vector<double> dcols(patch * hw);
                    for (std::size_t b = 0; b < batch; ++b) {
                      ConstMapMat dym(dy.data() + b * cout * hw, CO, HW);
                      ConstMapMat cm(cols->data() + b * patch * hw, P, HW);
                      dw.noalias() += dym * cm.transpose();
                      db += dym.rowwise().sum();
                      MapMat(dcols.data(), P, HW).noalias() = wm.transpose() * dym;
                      col2im_add(dcols.data(), cin, h, w, k, dx.data() + b * cin * hw);
                    }
                  });
}

Var conv3x3(Graph& g, Var x, const std::string& name) {
  const Tensor& wt = g.store().value(name + ".W");
  if (wt.rank() != 4 || wt.dim(2) != 3 || wt.dim(3) != 3) {
    throw DimensionError(name + ": conv3x3 needs a 3×3 kernel, got " + shape_string(wt.shape()));
  }
  return conv2d(g, x, name);
}

Var pointwise(Graph& g, Var x, Pointwise kind) {
  Tensor y = g.value(x);
  switch (kind) {
    case Pointwise::relu:
      for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
      return g.record(OpTag::relu, {x}, std::move(y), [x](Graph& gr, const Tensor& dy) {
        const Tensor& xv = gr.value(x);
        Tensor& dx = gr.grad_buffer(x);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          if (xv[i] > 0.0) dx[i] += dy[i];
        }
      });
    case Pointwise::sigmoid: {
      for (auto& v : y.values()) v = 1.0 / (1.0 + std::exp(-v));
      auto out = std::make_shared<Tensor>(y);
      return g.record(OpTag::sigmoid, {x}, std::move(y), [x, out](Graph& gr, const Tensor& dy) {
        Tensor& dx = gr.grad_buffer(x);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          const double s = (*out)[i];
          dx[i] += dy[i] * s * (1.0 - s);
        }
      });
    }
    case Pointwise::tanh: {
      for (auto& v : y.values()) v = std::tanh(v);
      auto out = std::make_shared<Tensor>(y);
      return g.record(OpTag::tanh, {x}, std::move(y), [x, out](Graph& gr, const Tensor& dy) {
        Tensor& dx = gr.grad_buffer(x);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          const double t = (*out)[i];
          dx[i] += dy[i] * (1.0 - t * t);
        }
      });
    }
  }
  throw UsageError("unknown pointwise kind");
}

Var add(Graph& g, Var a, Var b) {
  require_same_shape(g.value(a), g.value(b), "add");
  Tensor y = g.value(a);
  add_into(y, g.value(b));
  return g.record(OpTag::add, {a, b}, std::move(y), [a, b](Graph& gr, const Tensor& dy) {
    add_into(gr.grad_buffer(a), dy);
    add_into(gr.grad_buffer(b), dy);
  });
}

Var mul(Graph& g, Var a, Var b) {
  require_same_shape(g.value(a), g.value(b), "mul");
  Tensor y = g.value(a);
  const Tensor& bv = g.value(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return g.record(OpTag::mul, {a, b}, std::move(y), [a, b](Graph& gr, const Tensor& dy) {
    const Tensor& av = gr.value(a);
    const Tensor& bvv = gr.value(b);
    Tensor& da = gr.grad_buffer(a);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bvv[i];
    Tensor& db = gr.grad_buffer(b);
    for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * av[i];
  });
}

Var scale(Graph& g, Var x, double factor) {
  Tensor y = g.value(x);
  for (auto& v : y.values()) v *= factor;
  return g.record(OpTag::scale, {x}, std::move(y), [x, factor](Graph& gr, const Tensor& dy) {
    Tensor& dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += factor * dy[i];
  });
}

Var scale_by(Graph& g, Var x, Var s) {
  const double sv = g.value(s).item();
  Tensor y = g.value(x);
  for (auto& v : y.values()) v *= sv;
  return g.record(OpTag::scale_by, {x, s}, std::move(y), [x, s](Graph& gr, const Tensor& dy) {
    const double factor = gr.value(s).item();
    const Tensor& xv = gr.value(x);
    Tensor& dx = gr.grad_buffer(x);
    double ds = 0.0;
    for (std::size_t i = 0; i < dy.size(); ++i) {
      dx[i] += factor * dy[i];
      ds += xv[i] * dy[i];
    }
    gr.grad_buffer(s)[0] += ds;
  });
}

Var concat(Graph& g, std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat of zero tensors");
  std::vector<double> data;
  std::vector<Var> inputs(parts.begin(), parts.end());
  for (auto p : parts) {
    const auto vals = g.value(p).values();
    data.insert(data.end(), vals.begin(), vals.end());
  }
  Tensor y = Tensor::vector(std::move(data));
  return g.record(OpTag::concat, inputs, std::move(y), [inputs](Graph& gr, const Tensor& dy) {
    std::size_t offset = 0;
    for (auto p : inputs) {
      Tensor& dp = gr.grad_buffer(p);
      for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += dy[offset + i];
      offset += dp.size();
    }
  });
}

Var stack(Graph& g, std::span<const Var> rows) {
  if (rows.empty()) throw UsageError("stack of zero tensors");
  const std::size_t width = g.value(rows.front()).size();
  std::vector<double> data;
  data.reserve(width * rows.size());
  for (auto r : rows) {
    const Tensor& t = g.value(r);
    if (t.size() != width) {
      throw DimensionError("stack: row " + shape_string(t.shape()) + " differs from width " + std::to_string(width));
    }
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  std::vector<Var> inputs(rows.begin(), rows.end());
  Tensor y({rows.size(), width}, std::move(data));
  return g.record(OpTag::stack, inputs, std::move(y), [inputs, width](Graph& gr, const Tensor& dy) {
    for (std::size_t r = 0; r < inputs.size(); ++r) {
      Tensor& dr = gr.grad_buffer(inputs[r]);
      for (std::size_t i = 0; i < width; ++i) dr[i] += dy[r * width + i];
    }
  });
}

Var reshape(Graph& g, Var x, Shape shape) {
  Tensor y = g.value(x).reshaped(std::move(shape));
  return g.record(OpTag::reshape, {x}, std::move(y),
                  [x](Graph& gr, const Tensor& dy) { add_into(gr.grad_buffer(x), dy); });
}

Var log_softmax(Graph& g, Var x) {
  const Tensor& xt = g.value(x);
  const auto [rows, k] = rows_cols(xt, "log_softmax");
  Tensor y = xt;
  for (std::size_t r = 0; r < rows; ++r) {
    const double lse = stable_log_sum_exp(xt.data() + r * k, k);
    for (std::size_t i = 0; i < k; ++i) y[r * k + i] -= lse;
  }
  auto out = std::make_shared<Tensor>(y);
  return g.record(OpTag::log_softmax, {x}, std::move(y), [x, out, rows, k](Graph& gr, const Tensor& dy) {
    Tensor& dx = gr.grad_buffer(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) total += dy[r * k + i];
      for (std::size_t i = 0; i < k; ++i) dx[r * k + i] += dy[r * k + i] - std::exp((*out)[r * k + i]) * total;
    }
  });
}

Var softmax(Graph& g, Var x) {
  const Tensor& xt = g.value(x);
  const auto [rows, k] = rows_cols(xt, "softmax");
  Tensor y = xt;
  for (std::size_t r = 0; r < rows; ++r) {
    const double lse = stable_log_sum_exp(xt.data() + r * k, k);
    for (std::size_t i = 0; i < k; ++i) y[r * k + i] = std::exp(xt[r * k + i] - lse);
  }
  auto out = std::make_shared<Tensor>(y);
  return g.record(OpTag::softmax, {x}, std::move(y), [x, out, rows, k](Graph& gr, const Tensor& dy) {
    Tensor& dx = gr.grad_buffer(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t i = 0; i < k; ++i) dot += dy[r * k + i] * (*out)[r * k + i];
      for (std::size_t i = 0; i < k; ++i) dx[r * k + i] += (*out)[r * k + i] * (dy[r * k + i] - dot);
    }
  });
}

Var pick(Graph& g, Var x, std::size_t index) {
  const Tensor& xt = g.value(x);
  if (index >= xt.size()) {
    throw UsageError("pick index " + std::to_string(index) + " out of range for " + shape_string(xt.shape()));
  }
  return g.record(OpTag::pick, {x}, Tensor::scalar(xt[index]),
                  [x, index](Graph& gr, const Tensor& dy) { gr.grad_buffer(x)[index] += dy[0]; });
}

Var sum(Graph& g, Var x) {
  double total = 0.0;
  for (double v : g.value(x).values()) total += v;
  return g.record(OpTag::sum, {x}, Tensor::scalar(total), [x](Graph& gr, const Tensor& dy) {
    for (auto& v : gr.grad_buffer(x).values()) v += dy[0];
  });
}

Var entropy(Graph& g, Var logits) {
  const Var logp = log_softmax(g, logits);
  const Var p = softmax(g, logits);
  return scale(g, sum(g, mul(g, p, logp)), -1.0);
}

SoftmaxXent softmax_xent(Graph& g, Var logits, std::size_t label) {
  const Tensor& lt = g.value(logits);
  const auto [rows, k] = rows_cols(lt, "softmax_xent");
  if (label >= k) {
    throw UsageError("label " + std::to_string(label) + " out of range for " + std::to_string(k) + " classes");
  }
  Tensor probs(lt.shape());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double lse = stable_log_sum_exp(lt.data() + r * k, k);
    for (std::size_t i = 0; i < k; ++i) probs[r * k + i] = std::exp(lt[r * k + i] - lse);
    loss += lse - lt[r * k + label];
  }
  auto saved = std::make_shared<Tensor>(probs);
  Var loss_var = g.record(OpTag::custom, {logits}, Tensor::scalar(loss),
                          [logits, saved, rows, k, label](Graph& gr, const Tensor& dy) {
                            Tensor& dx = gr.grad_buffer(logits);
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t i = 0; i < k; ++i) {
                                const double onehot = i == label ? 1.0 : 0.0;
                                dx[r * k + i] += dy[0] * ((*saved)[r * k + i] - onehot);
                              }
                            }
                          });
  return SoftmaxXent{std::move(probs), loss_var};
}

Tensor softmax_values(std::span<const double> logits) {
  const double lse = stable_log_sum_exp(logits.data(), logits.size());
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - lse);
  return Tensor::vector(std::move(out));
}

}  // namespace mctsnet::nn
