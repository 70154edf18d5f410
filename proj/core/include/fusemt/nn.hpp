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

#include <string>
#include <vector>

#include "fusemt/autodiff.hpp"
#include "fusemt/params.hpp"

namespace fusemt {

// Gated recurrent unit with the three gates packed column-wise:
//   [z | r | n] = x·W + b  and  h·U
//   z = sigmoid(xz + hz), r = sigmoid(xr + hr)
//   n = tanh(xn + r * hn)
//   h' = n + z * (h - n)
template <typename T>
struct GruVars {
  Var<T> W;  // [in, 3h]
  Var<T> U;  // [h, 3h]
  Var<T> b;  // [3h]
  std::size_t hidden = 0;
};

template <typename T>
void add_gru_params(ParameterSet<T>& params, const std::string& prefix, std::size_t input, std::size_t hidden,
                    Rng& rng, double scale);

template <typename T>
GruVars<T> bind_gru(const Binder<T>& bind, const std::string& prefix, std::size_t hidden);

template <typename T>
Var<T> gru_step(const GruVars<T>& gru, Var<T> x, Var<T> h);

// h_prev + mask * (h_new - h_prev); mask rows are all-ones or all-zeros.
template <typename T>
Var<T> masked_update(Var<T> h_prev, Var<T> h_new, Var<T> mask);

// [rows, cols] constant of zeros.
template <typename T>
Var<T> zeros(Tape<T>& tape, std::size_t rows, std::size_t cols);

// Pads id sequences on the right with Vocabulary::kPad to a [B, max_len] grid.
struct PaddedBatch {
  std::vector<std::vector<int>> ids;  // ids[t][b], time-major
  std::vector<std::size_t> lengths;
  std::size_t max_len = 0;
  std::size_t batch = 0;
};
PaddedBatch pad_batch(const std::vector<std::vector<int>>& sequences);

}  // namespace fusemt
