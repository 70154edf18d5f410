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

#include "fusemt/language_model.hpp"

#include <cmath>

namespace fusemt {

template <typename T>
LanguageModel<T>::LanguageModel(Vocabulary vocab, LmConfig config, std::uint64_t seed)
    : vocab_(std::move(vocab)), config_(config) {
  if (config_.tie_embeddings && config_.embed_size != config_.hidden_size) {
    throw ConfigError("tied LM embeddings need embed_size == hidden_size");
  }
  Rng rng(seed);
  const std::size_t V = vocab_.size(), E = config_.embed_size, H = config_.hidden_size;
  Tensor<T> embed(Shape{V, E});
  fill_uniform(embed, rng, config_.init_scale);
  params_.add("lm.embed", std::move(embed));
  add_gru_params(params_, "lm.gru", E, H, rng, config_.init_scale);
  if (!config_.tie_embeddings) params_.add("lm.out.W", Tensor<T>(Shape{H, V}));
  params_.add("lm.out.b", Tensor<T>(Shape{V}));
  validate();
}

template <typename T>
LanguageModel<T>::LanguageModel(Vocabulary vocab, LmConfig config, ParameterSet<T> params)
    : vocab_(std::move(vocab)), config_(config), params_(std::move(params)) {
  validate();
}

template <typename T>
void LanguageModel<T>::validate() const {
  const std::size_t V = vocab_.size(), E = config_.embed_size, H = config_.hidden_size;
  auto expect = [&](const char* name, const Shape& shape) {
    if (!params_.contains(name)) throw DataError(std::string("language model is missing ") + name);
    if (params_.get(name).shape() != shape) {
      throw ShapeError(std::string("language model parameter ") + name + " has shape " +
                       shape_str(params_.get(name).shape()) + ", expected " + shape_str(shape));
    }
  };
  expect("lm.embed", {V, E});
  expect("lm.gru.W", {E, 3 * H});
  expect("lm.gru.U", {H, 3 * H});
  expect("lm.gru.b", {3 * H});
  if (!config_.tie_embeddings) expect("lm.out.W", {H, V});
  expect("lm.out.b", {V});
}

template <typename T>
typename LanguageModel<T>::Graph LanguageModel<T>::bind(const Binder<T>& bind) const {
  Graph g;
  g.embed = bind("lm.embed");
  g.gru = bind_gru(bind, "lm.gru", config_.hidden_size);
  g.tied = config_.tie_embeddings;
  if (!g.tied) g.out_W = bind("lm.out.W");
  g.out_b = bind("lm.out.b");
  return g;
}

template <typename T>
std::pair<Var<T>, Var<T>> LanguageModel<T>::step(const Graph& g, Var<T> state, std::span<const int> prev_ids) const {
  using namespace ops;
  Var<T> x = embedding(g.embed, prev_ids);
  Var<T> h = gru_step(g.gru, x, state);
  Var<T> logits = g.tied ? matmul_nt(h, g.embed) : matmul(h, g.out_W);
  return {h, add_bias(logits, g.out_b)};
}

template <typename T>
Var<T> LanguageModel<T>::batch_loss(const Binder<T>& bind, const std::vector<std::vector<int>>& sentences,
                                    std::size_t* tokens) const {
  Tape<T>& tape = bind.tape();
  Graph g = this->bind(bind);
  std::vector<std::vector<int>> targets;
  targets.reserve(sentences.size());
  for (const auto& s : sentences) {
    for (int id : s) {
      if (!vocab_.valid(id)) throw ContractError("language model: id " + std::to_string(id) + " out of range");
    }
    auto t = s;
    t.push_back(Vocabulary::kEos);
    targets.push_back(std::move(t));
  }
  const PaddedBatch pb = pad_batch(targets);
  Var<T> h = zeros(tape, pb.batch, config_.hidden_size);
  std::vector<int> prev(pb.batch, Vocabulary::kBos);
  std::vector<Var<T>> losses;
  std::size_t count = 0;
  for (std::size_t t = 0; t < pb.max_len; ++t) {
    auto [h_next, logits] = step(g, h, prev);
    h = h_next;
    std::vector<T> w(pb.batch);
    for (std::size_t b = 0; b < pb.batch; ++b) {
      w[b] = t < pb.lengths[b] ? T(1) : T(0);
      count += t < pb.lengths[b] ? 1 : 0;
    }
    losses.push_back(ops::cross_entropy(logits, std::span<const int>(pb.ids[t]), std::span<const T>(w)));
    prev = pb.ids[t];
  }
  if (tokens) *tokens = count;
  Var<T> total = losses.front();
  for (std::size_t i = 1; i < losses.size(); ++i) total = ops::add(total, losses[i]);
  return total;
}

template <typename T>
LmState<T> LanguageModel<T>::initial_state() const {
  return LmState<T>{std::vector<T>(config_.hidden_size, T(0))};
}

template <typename T>
LmStepResult<T> LanguageModel<T>::step(const LmState<T>& state, int prev_token) const {
  if (!vocab_.valid(prev_token)) {
    throw ContractError("lm_step: token id " + std::to_string(prev_token) + " out of range for LM vocabulary of " +
                        std::to_string(vocab_.size()));
  }
  if (state.hidden.size() != config_.hidden_size) throw ShapeError("lm_step: state has wrong dimension");
  Tape<T> tape;
  Graph g = bind(Binder<T>(tape, params_));
  Var<T> h = tape.input(Tensor<T>(Shape{1, config_.hidden_size}, state.hidden));
  const int ids[1] = {prev_token};
  auto [h_next, logits] = step(g, h, ids);
  return LmStepResult<T>{LmState<T>{h_next.value().storage()}, logits.value().storage()};
}

template <typename T>
double perplexity(const LanguageModel<T>& lm, const Corpus& corpus) {
  if (corpus.empty()) throw DataError("perplexity: empty corpus");
  constexpr std::size_t kChunk = 64;
  double nll = 0.0;
  std::size_t tokens = 0;
  for (std::size_t start = 0; start < corpus.size(); start += kChunk) {
    std::vector<std::vector<int>> ids;
    for (std::size_t i = start; i < std::min(corpus.size(), start + kChunk); ++i) ids.push_back(lm.vocab().encode(corpus[i]));
    Tape<T> tape;
    std::size_t n = 0;
    Var<T> loss = lm.batch_loss(Binder<T>(tape, lm.params()), ids, &n);
    nll += static_cast<double>(loss.value().item());
    tokens += n;
  }
  return std::exp(nll / static_cast<double>(tokens));
}

template class LanguageModel<float>;
template class LanguageModel<double>;
template double perplexity<float>(const LanguageModel<float>&, const Corpus&);
template double perplexity<double>(const LanguageModel<double>&, const Corpus&);

}  // namespace fusemt
