/* Copyright 2026 The FuseMT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "fusemt/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace fusemt {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
CMatMap<T> as_matrix(const Tensor<T>& t) {
  return CMatMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
MatMap<T> as_matrix(std::vector<T>& buf, std::size_t rows, std::size_t cols) {
  return MatMap<T>(buf.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename T>
CMatMap<T> as_matrix(std::span<const T> buf, std::size_t rows, std::size_t cols) {
  return CMatMap<T>(buf.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

[[noreturn]] void shape_fail(std::string_view op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] void shape_fail(std::string_view op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": shape " + shape_str(a) + " " + why);
}

template <typename T>
void require_same_tape(std::string_view op, Var<T> a, Var<T> b) {
  if (a.tape != b.tape) throw ContractError(std::string(op) + ": operands live on different tapes");
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var<T> Tape<T>::parameter(Tensor<T>& param) {
  Node n;
  n.ref = &param;
  n.param = &param;
  n.requires_grad = param.requires_grad();
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::constant(const Tensor<T>& value) {
  Node n;
  n.ref = &value;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::input(Tensor<T> value, bool requires_grad) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::record(std::string_view op, Tensor<T> out, std::initializer_list<Var<T>> inputs,
                       BackwardFn backward) {
  if (!out.all_finite()) {
    throw NumericError(std::string(op) + ": numeric overflow (non-finite output of shape " +
                       shape_str(out.shape()) + ")");
  }
  bool any = false;
  for (const auto& v : inputs) {
    if (v.tape != this) throw ContractError(std::string(op) + ": input from a different tape");
    any = any || nodes_[v.id].requires_grad;
  }
  Node n;
  n.owned = std::move(out);
  n.requires_grad = any;
  Var<T> result = push(std::move(n));
  if (any) entries_.push_back(Entry{op, result.id, std::move(backward)});
  return result;
}

template <typename T>
std::vector<T>& Tape<T>::grad_buffer(Var<T> v) {
  Node& n = nodes_[v.id];
  if (n.grad.empty()) n.grad.assign(n.value().size(), T(0));
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape != this) throw ContractError("backward: loss is not on this tape");
  if (value(loss).size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_str(value(loss).shape()));
  }
  if (backward_done_) throw ContractError("backward: tape already consumed");
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss)[0] = T(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    Var<T> out{this, it->output};
    if (!has_grad(out)) continue;
    it->backward(*this, out);
  }
  for (Node& n : nodes_) {
    if (n.param == nullptr || !n.requires_grad || n.grad.empty()) continue;
    Tensor<T>& p = *n.param;
    if (!p.has_grad()) p.zero_grad();
    auto g = p.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  }
}

template class Tape<float>;
template class Tape<double>;

// ---------------------------------------------------------------------------
// Primitives

namespace ops {

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_same_tape("matmul", a, b);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) shape_fail("matmul", av.shape(), bv.shape());
  const std::size_t m = av.dim(0), n = bv.dim(1);
  std::vector<T> buf(m * n);
  as_matrix(buf, m, n).noalias() = as_matrix(av) * as_matrix(bv);
  return a.tape->record("matmul", Tensor<T>(Shape{m, n}, std::move(buf)), {a, b}, [a, b, m, n](Tape<T>& tape, Var<T> o) {
    auto dc = as_matrix(tape.grad(o), m, n);
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    if (tape.requires_grad(a)) {
      auto& ga = tape.grad_buffer(a);
      as_matrix(ga, av.dim(0), av.dim(1)).noalias() += dc * as_matrix(bv).transpose();
    }
    if (tape.requires_grad(b)) {
      auto& gb = tape.grad_buffer(b);
      as_matrix(gb, bv.dim(0), bv.dim(1)).noalias() += as_matrix(av).transpose() * dc;
    }
  });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  require_same_tape("matmul_nt", a, b);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1)) shape_fail("matmul_nt", av.shape(), bv.shape());
  const std::size_t m = av.dim(0), n = bv.dim(0);
  std::vector<T> buf(m * n);
  as_matrix(buf, m, n).noalias() = as_matrix(av) * as_matrix(bv).transpose();
  return a.tape->record("matmul_nt", Tensor<T>(Shape{m, n}, std::move(buf)), {a, b},
                        [a, b, m, n](Tape<T>& tape, Var<T> o) {
                          auto dc = as_matrix(tape.grad(o), m, n);
                          const Tensor<T>& av = tape.value(a);
                          const Tensor<T>& bv = tape.value(b);
                          if (tape.requires_grad(a)) {
                            auto& ga = tape.grad_buffer(a);
                            as_matrix(ga, av.dim(0), av.dim(1)).noalias() += dc * as_matrix(bv);
                          }
                          if (tape.requires_grad(b)) {
                            auto& gb = tape.grad_buffer(b);
                            as_matrix(gb, bv.dim(0), bv.dim(1)).noalias() += dc.transpose() * as_matrix(av);
                          }
                        });
}

namespace {

template <typename T>
void accumulate(Tape<T>& tape, Var<T> target, std::span<const T> g, T factor = T(1)) {
  if (!tape.requires_grad(target)) return;
  auto& buf = tape.grad_buffer(target);
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += factor * g[i];
}

template <typename T, typename F, typename D>
Var<T> unary(std::string_view op, Var<T> x, F forward, D derivative_from_output) {
  const Tensor<T>& xv = x.value();
  std::vector<T> buf(xv.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = forward(xv[i]);
  return x.tape->record(op, Tensor<T>(xv.shape(), std::move(buf)), {x},
                        [x, derivative_from_output](Tape<T>& tape, Var<T> o) {
                          auto g = tape.grad(o);
                          const Tensor<T>& xv = tape.value(x);
                          const Tensor<T>& ov = tape.value(o);
                          auto& gx = tape.grad_buffer(x);
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            gx[i] += g[i] * derivative_from_output(xv[i], ov[i]);
                          }
                        });
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_tape("add", a, b);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.shape() != bv.shape()) shape_fail("add", av.shape(), bv.shape());
  std::vector<T> buf(av.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = av[i] + bv[i];
  return a.tape->record("add", Tensor<T>(av.shape(), std::move(buf)), {a, b}, [a, b](Tape<T>& tape, Var<T> o) {
    auto g = tape.grad(o);
    accumulate(tape, a, g);
    accumulate(tape, b, g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_tape("sub", a, b);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.shape() != bv.shape()) shape_fail("sub", av.shape(), bv.shape());
  std::vector<T> buf(av.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = av[i] - bv[i];
  return a.tape->record("sub", Tensor<T>(av.shape(), std::move(buf)), {a, b}, [a, b](Tape<T>& tape, Var<T> o) {
    auto g = tape.grad(o);
    accumulate(tape, a, g);
    accumulate(tape, b, g, T(-1));
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_tape("mul", a, b);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.shape() != bv.shape()) shape_fail("mul", av.shape(), bv.shape());
  std::vector<T> buf(av.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = av[i] * bv[i];
  return a.tape->record("mul", Tensor<T>(av.shape(), std::move(buf)), {a, b}, [a, b](Tape<T>& tape, Var<T> o) {
    auto g = tape.grad(o);
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    if (tape.requires_grad(a)) {
      auto& ga = tape.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tape.requires_grad(b)) {
      auto& gb = tape.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  require_same_tape("add_bias", x, bias);
  const Tensor<T>& xv = x.value();
  const Tensor<T>& bv = bias.value();
  if (bv.rank() != 1 || bv.dim(0) != xv.cols()) shape_fail("add_bias", xv.shape(), bv.shape());
  const std::size_t rows = xv.rows(), cols = xv.cols();
  std::vector<T> buf(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) buf[r * cols + c] = xv[r * cols + c] + bv[c];
  }
  return x.tape->record("add_bias", Tensor<T>(xv.shape(), std::move(buf)), {x, bias},
                        [x, bias, rows, cols](Tape<T>& tape, Var<T> o) {
                          auto g = tape.grad(o);
                          accumulate(tape, x, g);
                          if (tape.requires_grad(bias)) {
                            auto& gb = tape.grad_buffer(bias);
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
                            }
                          }
                        });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
  const Tensor<T>& xv = x.value();
  std::vector<T> buf(xv.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = factor * xv[i];
  return x.tape->record("scale", Tensor<T>(xv.shape(), std::move(buf)), {x}, [x, factor](Tape<T>& tape, Var<T> o) {
    accumulate(tape, x, tape.grad(o), factor);
  });
}

template <typename T>
Var<T> concat(Var<T> a, Var<T> b) {
  require_same_tape("concat", a, b);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != bv.rank() || av.rank() == 0) shape_fail("concat", av.shape(), bv.shape());
  for (std::size_t i = 0; i + 1 < av.rank(); ++i) {
    if (av.dim(i) != bv.dim(i)) shape_fail("concat", av.shape(), bv.shape());
  }
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols(), cols = ca + cb;
  Shape shape = av.shape();
  shape.back() = cols;
  std::vector<T> buf(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ca, ca, buf.data() + r * cols);
    std::copy_n(bv.data() + r * cb, cb, buf.data() + r * cols + ca);
  }
  return a.tape->record("concat", Tensor<T>(std::move(shape), std::move(buf)), {a, b},
                        [a, b, rows, ca, cb, cols](Tape<T>& tape, Var<T> o) {
                          auto g = tape.grad(o);
                          if (tape.requires_grad(a)) {
                            auto& ga = tape.grad_buffer(a);
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t c = 0; c < ca; ++c) ga[r * ca + c] += g[r * cols + c];
                            }
                          }
                          if (tape.requires_grad(b)) {
                            auto& gb = tape.grad_buffer(b);
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t c = 0; c < cb; ++c) gb[r * cb + c] += g[r * cols + ca + c];
                            }
                          }
                        });
}

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t end) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() == 0 || begin >= end || end > xv.cols()) {
    shape_fail("slice_cols", xv.shape(), "cannot take columns [" + std::to_string(begin) + "," + std::to_string(end) + ")");
  }
  const std::size_t rows = xv.rows(), cols = xv.cols(), width = end - begin;
  Shape shape = xv.shape();
  shape.back() = width;
  std::vector<T> buf(rows * width);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.data() + r * cols + begin, width, buf.data() + r * width);
  return x.tape->record("slice_cols", Tensor<T>(std::move(shape), std::move(buf)), {x},
                        [x, rows, cols, begin, width](Tape<T>& tape, Var<T> o) {
                          auto g = tape.grad(o);
                          auto& gx = tape.grad_buffer(x);
                          for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t c = 0; c < width; ++c) gx[r * cols + begin + c] += g[r * width + c];
                          }
                        });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  return unary<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  return unary<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> exp(Var<T> x) {
  return unary<T>(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(Var<T> x) {
  const Tensor<T>& xv = x.value();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (!(xv[i] > T(0))) throw NumericError("log: non-positive input " + std::to_string(xv[i]));
  }
  return unary<T>(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Var<T> log_floor(Var<T> x, T floor) {
  return unary<T>(
      "log_floor", x, [floor](T v) { return std::log(std::max(v, floor)); },
      [floor](T v, T) { return v > floor ? T(1) / v : T(0); });
}

template <typename T>
Var<T> softmax(Var<T> x) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() == 0) shape_fail("softmax", xv.shape(), "has no axis to normalise");
  const std::size_t rows = xv.rows(), cols = xv.cols();
  std::vector<T> buf(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.data() + r * cols;
    T* out = buf.data() + r * cols;
    const T mx = *std::max_element(in, in + cols);
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] = std::exp(in[c] - mx);
      total += out[c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[c] /= total;
  }
  return x.tape->record("softmax", Tensor<T>(xv.shape(), std::move(buf)), {x},
                        [x, rows, cols](Tape<T>& tape, Var<T> o) {
                          auto g = tape.grad(o);
                          const Tensor<T>& y = tape.value(o);
                          auto& gx = tape.grad_buffer(x);
                          for (std::size_t r = 0; r < rows; ++r) {
                            T dot = 0;
                            for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
                            for (std::size_t c = 0; c < cols; ++c) {
                              gx[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
                            }
                          }
                        });
}

template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids) {
  const Tensor<T>& tv = table.value();
  if (tv.rank() != 2) shape_fail("embedding", tv.shape(), "is not a [V,E] table");
  const std::size_t vocab = tv.dim(0), width = tv.dim(1);
  if (ids.empty()) throw ShapeError("embedding: empty id list");
  std::vector<int> idx(ids.begin(), ids.end());
  std::vector<T> buf(idx.size() * width);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= vocab) {
      throw ContractError("embedding: id " + std::to_string(idx[i]) + " out of range for table of " +
                          std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(idx[i]) * width, width, buf.data() + i * width);
  }
  Tensor<T> out(Shape{idx.size(), width}, std::move(buf));
  return table.tape->record("embedding", std::move(out), {table},
                            [table, idx = std::move(idx), width](Tape<T>& tape, Var<T> o) {
                              auto g = tape.grad(o);
                              auto& gt = tape.grad_buffer(table);
                              for (std::size_t i = 0; i < idx.size(); ++i) {
                                T* row = gt.data() + static_cast<std::size_t>(idx[i]) * width;
                                for (std::size_t c = 0; c < width; ++c) row[c] += g[i * width + c];
                              }
                            });
}

template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets, std::span<const T> weights) {
  const Tensor<T>& lv = logits.value();
  if (lv.rank() == 0) shape_fail("cross_entropy", lv.shape(), "has no class axis");
  const std::size_t rows = lv.rows(), cols = lv.cols();
  if (targets.size() != rows || weights.size() != rows) {
    throw ShapeError("cross_entropy: logits " + shape_str(lv.shape()) + " vs " + std::to_string(targets.size()) +
                     " targets and " + std::to_string(weights.size()) + " weights");
  }
  std::vector<T> probs(lv.size());
  T loss = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= cols) {
      throw ContractError("cross_entropy: target " + std::to_string(t) + " out of range for " +
                          std::to_string(cols) + " classes");
    }
    const T* in = lv.data() + r * cols;
    T* p = probs.data() + r * cols;
    const T mx = *std::max_element(in, in + cols);
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      p[c] = std::exp(in[c] - mx);
      total += p[c];
    }
    for (std::size_t c = 0; c < cols; ++c) p[c] /= total;
    if (weights[r] != T(0)) loss += weights[r] * (std::log(total) + mx - in[t]);
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<T> w(weights.begin(), weights.end());
  return logits.tape->record(
      "cross_entropy", Tensor<T>::scalar(loss), {logits},
      [logits, rows, cols, probs = std::move(probs), tgt = std::move(tgt), w = std::move(w)](Tape<T>& tape,
                                                                                            Var<T> o) {
        const T g = tape.grad(o)[0];
        auto& gl = tape.grad_buffer(logits);
        for (std::size_t r = 0; r < rows; ++r) {
          if (w[r] == T(0)) continue;
          const T f = g * w[r];
          for (std::size_t c = 0; c < cols; ++c) gl[r * cols + c] += f * probs[r * cols + c];
          gl[r * cols + static_cast<std::size_t>(tgt[r])] -= f;
        }
      });
}

template <typename T>
Var<T> sum(Var<T> x) {
  const Tensor<T>& xv = x.value();
  T total = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += xv[i];
  return x.tape->record("sum", Tensor<T>::scalar(total), {x}, [x](Tape<T>& tape, Var<T> o) {
    const T g = tape.grad(o)[0];
    auto& gx = tape.grad_buffer(x);
    for (auto& v : gx) v += g;
  });
}

template <typename T>
Var<T> stack_steps(std::span<const Var<T>> steps) {
  if (steps.empty()) throw ShapeError("stack_steps: no steps");
  Tape<T>* tape = steps[0].tape;
  const Tensor<T>& first = steps[0].value();
  if (first.rank() != 2) shape_fail("stack_steps", first.shape(), "is not [B,h]");
  const std::size_t batch = first.dim(0), width = first.dim(1), len = steps.size();
  std::vector<T> buf(batch * len * width);
  for (std::size_t s = 0; s < len; ++s) {
    require_same_tape("stack_steps", steps[0], steps[s]);
    const Tensor<T>& sv = steps[s].value();
    if (sv.shape() != first.shape()) shape_fail("stack_steps", first.shape(), sv.shape());
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(sv.data() + b * width, width, buf.data() + (b * len + s) * width);
    }
  }
  std::vector<Var<T>> inputs(steps.begin(), steps.end());
  Tensor<T> out(Shape{batch, len, width}, std::move(buf));
  // The entry is anchored on one differentiable input; the closure covers all.
  bool any = false;
  for (const auto& v : inputs) any = any || tape->requires_grad(v);
  Var<T> anchor = any ? *std::find_if(inputs.begin(), inputs.end(), [&](Var<T> v) { return tape->requires_grad(v); })
                      : inputs[0];
  return tape->record("stack_steps", std::move(out), {anchor},
                      [inputs = std::move(inputs), batch, len, width](Tape<T>& tp, Var<T> o) {
                        auto g = tp.grad(o);
                        for (std::size_t s = 0; s < len; ++s) {
                          if (!tp.requires_grad(inputs[s])) continue;
                          auto& gs = tp.grad_buffer(inputs[s]);
                          for (std::size_t b = 0; b < batch; ++b) {
                            for (std::size_t c = 0; c < width; ++c) gs[b * width + c] += g[(b * len + s) * width + c];
                          }
                        }
                      });
}

template <typename T>
Var<T> batched_scores(Var<T> keys, Var<T> query) {
  require_same_tape("batched_scores", keys, query);
  const Tensor<T>& kv = keys.value();
  const Tensor<T>& qv = query.value();
  if (kv.rank() != 3 || qv.rank() != 2 || kv.dim(0) != qv.dim(0) || kv.dim(2) != qv.dim(1)) {
    shape_fail("batched_scores", kv.shape(), qv.shape());
  }
  const std::size_t batch = kv.dim(0), len = kv.dim(1), width = kv.dim(2);
  std::vector<T> buf(batch * len);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* q = qv.data() + b * width;
    for (std::size_t s = 0; s < len; ++s) {
      const T* k = kv.data() + (b * len + s) * width;
      T dot = 0;
      for (std::size_t c = 0; c < width; ++c) dot += k[c] * q[c];
      buf[b * len + s] = dot;
    }
  }
  return keys.tape->record("batched_scores", Tensor<T>(Shape{batch, len}, std::move(buf)), {keys, query},
                           [keys, query, batch, len, width](Tape<T>& tape, Var<T> o) {
                             auto g = tape.grad(o);
                             const Tensor<T>& kv = tape.value(keys);
                             const Tensor<T>& qv = tape.value(query);
                             if (tape.requires_grad(keys)) {
                               auto& gk = tape.grad_buffer(keys);
                               for (std::size_t b = 0; b < batch; ++b) {
                                 for (std::size_t s = 0; s < len; ++s) {
                                   const T f = g[b * len + s];
                                   for (std::size_t c = 0; c < width; ++c) {
                                     gk[(b * len + s) * width + c] += f * qv[b * width + c];
                                   }
                                 }
                               }
                             }
                             if (tape.requires_grad(query)) {
                               auto& gq = tape.grad_buffer(query);
                               for (std::size_t b = 0; b < batch; ++b) {
                                 for (std::size_t s = 0; s < len; ++s) {
                                   const T f = g[b * len + s];
                                   for (std::size_t c = 0; c < width; ++c) {
                                     gq[b * width + c] += f * kv[(b * len + s) * width + c];
                                   }
                                 }
                               }
                             }
                           });
}

template <typename T>
Var<T> batched_context(Var<T> weights, Var<T> values) {
  require_same_tape("batched_context", weights, values);
  const Tensor<T>& wv = weights.value();
  const Tensor<T>& vv = values.value();
  if (wv.rank() != 2 || vv.rank() != 3 || wv.dim(0) != vv.dim(0) || wv.dim(1) != vv.dim(1)) {
    shape_fail("batched_context", wv.shape(), vv.shape());
  }
  const std::size_t batch = vv.dim(0), len = vv.dim(1), width = vv.dim(2);
  std::vector<T> buf(batch * width, T(0));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t s = 0; s < len; ++s) {
      const T a = wv[b * len + s];
      const T* v = vv.data() + (b * len + s) * width;
      for (std::size_t c = 0; c < width; ++c) buf[b * width + c] += a * v[c];
    }
  }
  return weights.tape->record("batched_context", Tensor<T>(Shape{batch, width}, std::move(buf)), {weights, values},
                              [weights, values, batch, len, width](Tape<T>& tape, Var<T> o) {
                                auto g = tape.grad(o);
                                const Tensor<T>& wv = tape.value(weights);
                                const Tensor<T>& vv = tape.value(values);
                                if (tape.requires_grad(weights)) {
                                  auto& gw = tape.grad_buffer(weights);
                                  for (std::size_t b = 0; b < batch; ++b) {
                                    for (std::size_t s = 0; s < len; ++s) {
                                      T dot = 0;
                                      for (std::size_t c = 0; c < width; ++c) {
                                        dot += g[b * width + c] * vv[(b * len + s) * width + c];
                                      }
                                      gw[b * len + s] += dot;
                                    }
                                  }
                                }
                                if (tape.requires_grad(values)) {
                                  auto& gv = tape.grad_buffer(values);
                                  for (std::size_t b = 0; b < batch; ++b) {
                                    for (std::size_t s = 0; s < len; ++s) {
                                      const T a = wv[b * len + s];
                                      for (std::size_t c = 0; c < width; ++c) {
                                        gv[(b * len + s) * width + c] += a * g[b * width + c];
                                      }
                                    }
                                  }
                                }
                              });
}

#define FUSEMT_INSTANTIATE_OPS(T)                                                      \
  template Var<T> matmul<T>(Var<T>, Var<T>);                                           \
  template Var<T> matmul_nt<T>(Var<T>, Var<T>);                                        \
  template Var<T> add<T>(Var<T>, Var<T>);                                              \
  template Var<T> sub<T>(Var<T>, Var<T>);                                              \
  template Var<T> mul<T>(Var<T>, Var<T>);                                              \
  template Var<T> add_bias<T>(Var<T>, Var<T>);                                         \
  template Var<T> scale<T>(Var<T>, T);                                                 \
  template Var<T> concat<T>(Var<T>, Var<T>);                                           \
  template Var<T> slice_cols<T>(Var<T>, std::size_t, std::size_t);                    \
  template Var<T> tanh<T>(Var<T>);                                                     \
  template Var<T> sigmoid<T>(Var<T>);                                                  \
  template Var<T> exp<T>(Var<T>);                                                      \
  template Var<T> log<T>(Var<T>);                                                      \
  template Var<T> log_floor<T>(Var<T>, T);                                             \
  template Var<T> softmax<T>(Var<T>);                                                  \
  template Var<T> embedding<T>(Var<T>, std::span<const int>);                          \
  template Var<T> cross_entropy<T>(Var<T>, std::span<const int>, std::span<const T>); \
  template Var<T> sum<T>(Var<T>);                                                      \
  template Var<T> stack_steps<T>(std::span<const Var<T>>);                             \
  template Var<T> batched_scores<T>(Var<T>, Var<T>);                                   \
  template Var<T> batched_context<T>(Var<T>, Var<T>);

FUSEMT_INSTANTIATE_OPS(float)
FUSEMT_INSTANTIATE_OPS(double)

#undef FUSEMT_INSTANTIATE_OPS

}  // namespace ops
}  // namespace fusemt
