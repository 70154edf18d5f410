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

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "fusemt/tensor.hpp"

namespace fusemt {

template <typename T>
class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// tape lives.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode gradient tape.
//
// Nodes are either leaves (parameters, constants, inputs) or outputs of a
// primitive. A primitive is recorded as an entry only when at least one input
// requires a gradient, so inference on constants builds no backward graph.
// Entries are appended in execution order, which is a topological order, and
// backward() replays them once in reverse. Gradients accumulate on reuse.
//
// A tape and its nodes belong to one thread.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var<T> out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Binds a parameter by reference. If it requires grad, backward() adds the
  // gradient into param.grad(). The tensor must outlive the tape.
  Var<T> parameter(Tensor<T>& param);
  // Binds a tensor by reference as a non-differentiable leaf.
  Var<T> constant(const Tensor<T>& value);
  // Takes ownership of a leaf value.
  Var<T> input(Tensor<T> value, bool requires_grad = false);

  const Tensor<T>& value(Var<T> v) const { return nodes_[v.id].value(); }
  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }
  // Gradient of the last backward() loss w.r.t. v; empty when unreached.
  std::span<const T> grad(Var<T> v) const { return nodes_[v.id].grad; }

  // Requires a scalar loss recorded on this tape. May be called once.
  void backward(Var<T> loss);

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_entries() const noexcept { return entries_.size(); }

  // Primitive plumbing. `out` is checked for non-finite values.
  Var<T> record(std::string_view op, Tensor<T> out, std::initializer_list<Var<T>> inputs,
                BackwardFn backward);
  // Zero-initialised on first access.
  std::vector<T>& grad_buffer(Var<T> v);
  bool has_grad(Var<T> v) const { return !nodes_[v.id].grad.empty(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* ref = nullptr;
    Tensor<T>* param = nullptr;
    bool requires_grad = false;
    std::vector<T> grad;

    const Tensor<T>& value() const { return ref ? *ref : owned; }
  };
  struct Entry {
    std::string_view op;
    std::uint32_t output;
    BackwardFn backward;
  };

  Var<T> push(Node node);

  std::deque<Node> nodes_;
  std::vector<Entry> entries_;
  bool backward_done_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape->value(*this);
}

extern template class Tape<float>;
extern template class Tape<double>;

// Differentiable primitives. Shapes are validated and violations raise
// ShapeError naming the primitive and both operand shapes.
namespace ops {

// [m,k]·[k,n] -> [m,n]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);
// [m,k]·[n,k]^T -> [m,n]
template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
// Adds a [n] bias to every row of a [..., n] tensor.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias);
template <typename T>
Var<T> scale(Var<T> x, T factor);

// Concatenation along the last axis; leading dims must agree.
template <typename T>
Var<T> concat(Var<T> a, Var<T> b);
// Columns [begin, end) of the last axis.
template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t end);

template <typename T>
Var<T> tanh(Var<T> x);
template <typename T>
Var<T> sigmoid(Var<T> x);
template <typename T>
Var<T> exp(Var<T> x);
template <typename T>
Var<T> log(Var<T> x);
// log(max(x, floor)); zero gradient where clamped.
template <typename T>
Var<T> log_floor(Var<T> x, T floor);
// Softmax over the last axis, stabilised by subtracting the row max.
template <typename T>
Var<T> softmax(Var<T> x);

// Rows of a [V,E] table -> [n,E].
template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids);

// sum_i weight_i * -log softmax(logits_i)[target_i] over rows of [n,V].
// Rows with zero weight contribute nothing (padding).
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets, std::span<const T> weights);

template <typename T>
Var<T> sum(Var<T> x);

// Stacks S tensors of shape [B,h] into [B,S,h].
template <typename T>
Var<T> stack_steps(std::span<const Var<T>> steps);
// keys [B,S,h], query [B,h] -> [B,S] dot products.
template <typename T>
Var<T> batched_scores(Var<T> keys, Var<T> query);
// weights [B,S], values [B,S,h] -> [B,h] weighted sums.
template <typename T>
Var<T> batched_context(Var<T> weights, Var<T> values);

}  // namespace ops
}  // namespace fusemt
