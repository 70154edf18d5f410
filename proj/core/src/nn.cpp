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

#include "fusemt/nn.hpp"

#include <algorithm>

#include "fusemt/vocabulary.hpp"

namespace fusemt {

template <typename T>
void add_gru_params(ParameterSet<T>& params, const std::string& prefix, std::size_t input, std::size_t hidden,
                    Rng& rng, double scale) {
  Tensor<T> W(Shape{input, 3 * hidden});
  Tensor<T> U(Shape{hidden, 3 * hidden});
  fill_uniform(W, rng, scale);
  fill_uniform(U, rng, scale);
  params.add(prefix + ".W", std::move(W));
  params.add(prefix + ".U", std::move(U));
  params.add(prefix + ".b", Tensor<T>(Shape{3 * hidden}));
}

template <typename T>
GruVars<T> bind_gru(const Binder<T>& bind, const std::string& prefix, std::size_t hidden) {
  return GruVars<T>{bind(prefix + ".W"), bind(prefix + ".U"), bind(prefix + ".b"), hidden};
}

template <typename T>
Var<T> gru_step(const GruVars<T>& gru, Var<T> x, Var<T> h) {
  using namespace ops;
  const std::size_t n = gru.hidden;
  Var<T> xw = add_bias(matmul(x, gru.W), gru.b);
  Var<T> hu = matmul(h, gru.U);
  Var<T> z = sigmoid(add(slice_cols(xw, 0, n), slice_cols(hu, 0, n)));
  Var<T> r = sigmoid(add(slice_cols(xw, n, 2 * n), slice_cols(hu, n, 2 * n)));
  Var<T> cand = tanh(add(slice_cols(xw, 2 * n, 3 * n), mul(r, slice_cols(hu, 2 * n, 3 * n))));
  return add(cand, mul(z, sub(h, cand)));
}

template <typename T>
Var<T> masked_update(Var<T> h_prev, Var<T> h_new, Var<T> mask) {
  using namespace ops;
  return add(h_prev, mul(mask, sub(h_new, h_prev)));
}

template <typename T>
Var<T> zeros(Tape<T>& tape, std::size_t rows, std::size_t cols) {
  return tape.input(Tensor<T>(Shape{rows, cols}));
}

PaddedBatch pad_batch(const std::vector<std::vector<int>>& sequences) {
  PaddedBatch pb;
  pb.batch = sequences.size();
  for (const auto& s : sequences) {
    pb.lengths.push_back(s.size());
    pb.max_len = std::max(pb.max_len, s.size());
  }
  pb.ids.assign(pb.max_len, std::vector<int>(pb.batch, Vocabulary::kPad));
  for (std::size_t b = 0; b < pb.batch; ++b) {
    for (std::size_t t = 0; t < sequences[b].size(); ++t) pb.ids[t][b] = sequences[b][t];
  }
  return pb;
}

#define FUSEMT_INSTANTIATE_NN(T)                                                                             \
  template void add_gru_params<T>(ParameterSet<T>&, const std::string&, std::size_t, std::size_t, Rng&, double); \
  template GruVars<T> bind_gru<T>(const Binder<T>&, const std::string&, std::size_t);                      \
  template Var<T> gru_step<T>(const GruVars<T>&, Var<T>, Var<T>);                                           \
  template Var<T> masked_update<T>(Var<T>, Var<T>, Var<T>);                                                 \
  template Var<T> zeros<T>(Tape<T>&, std::size_t, std::size_t);

FUSEMT_INSTANTIATE_NN(float)
FUSEMT_INSTANTIATE_NN(double)

#undef FUSEMT_INSTANTIATE_NN

}  // namespace fusemt
