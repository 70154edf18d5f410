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
#include <map>
#include <random>
#include <string>
#include <string_view>

#include "fusemt/autodiff.hpp"
#include "fusemt/tensor.hpp"

namespace fusemt {

using Rng = std::mt19937_64;

// Uniform draw in [lo, hi) from the top 53 bits of the generator. Does not
// depend on the standard library's distribution implementations.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double scale) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(uniform(rng, -scale, scale));
}

// Named tensors. Iteration is in name order, which fixes the order of
// checksums, checkpoints and optimizer updates. References stay valid for
// the lifetime of the set.
template <typename T>
class ParameterSet {
 public:
  using Map = std::map<std::string, Tensor<T>, std::less<>>;

  Tensor<T>& add(std::string name, Tensor<T> tensor);
  Tensor<T>& get(std::string_view name);
  const Tensor<T>& get(std::string_view name) const;
  bool contains(std::string_view name) const { return tensors_.find(name) != tensors_.end(); }
  std::size_t size() const noexcept { return tensors_.size(); }
  std::size_t num_values() const noexcept;

  auto begin() noexcept { return tensors_.begin(); }
  auto end() noexcept { return tensors_.end(); }
  auto begin() const noexcept { return tensors_.begin(); }
  auto end() const noexcept { return tensors_.end(); }

  void set_requires_grad(bool on);
  void zero_grad();
  // FNV-1a over names, shapes and raw value bytes.
  std::uint64_t checksum() const;

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& [name, t] : tensors_) out.add(name, t.template cast<U>());
    return out;
  }

 private:
  Map tensors_;
};

// Looks parameters up by name and binds them onto a tape. Built from a
// mutable set it binds trainable parameters; from a const set, constants.
template <typename T>
class Binder {
 public:
  Binder(Tape<T>& tape, ParameterSet<T>& params) : tape_(&tape), mutable_(&params), params_(&params) {}
  Binder(Tape<T>& tape, const ParameterSet<T>& params) : tape_(&tape), params_(&params) {}

  Var<T> operator()(std::string_view name) const {
    return mutable_ ? tape_->parameter(mutable_->get(name)) : tape_->constant(params_->get(name));
  }
  Tape<T>& tape() const { return *tape_; }

 private:
  Tape<T>* tape_;
  ParameterSet<T>* mutable_ = nullptr;
  const ParameterSet<T>* params_;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace fusemt
