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

#include "fusemt/translation_model.hpp"

namespace fusemt {

template <typename T>
TranslationModel<T>::TranslationModel(Vocabulary source_vocab, Vocabulary target_vocab, TmConfig config,
                                      std::uint64_t seed)
    : src_vocab_(std::move(source_vocab)), tgt_vocab_(std::move(target_vocab)), config_(config) {
  Rng rng(seed);
  const std::size_t E = config_.embed_size, H = config_.hidden_size;
  const double s = config_.init_scale;
  auto random = [&](const std::string& name, Shape shape) {
    Tensor<T> t(std::move(shape));
    fill_uniform(t, rng, s);
    params_.add(name, std::move(t));
  };
  random("tm.src_embed", {src_vocab_.size(), E});
  add_gru_params(params_, "tm.enc.fwd", E, H, rng, s);
  add_gru_params(params_, "tm.enc.bwd", E, H, rng, s);
  random("tm.enc.proj.W", {2 * H, H});
  params_.add("tm.enc.proj.b", Tensor<T>(Shape{H}));
  random("tm.init.W", {2 * H, H});
  params_.add("tm.init.b", Tensor<T>(Shape{H}));
  random("tm.tgt_embed", {tgt_vocab_.size(), E});
  add_gru_params(params_, "tm.dec", E, H, rng, s);
  random("tm.attn.W", {H, H});
  random("tm.comb.W", {2 * H, H});
  params_.add("tm.comb.b", Tensor<T>(Shape{H}));
  if (config_.output_layer) {
    params_.add("tm.out.W", Tensor<T>(Shape{H, tgt_vocab_.size()}));
    params_.add("tm.out.b", Tensor<T>(Shape{tgt_vocab_.size()}));
  }
  validate();
}

template <typename T>
TranslationModel<T>::TranslationModel(Vocabulary source_vocab, Vocabulary target_vocab, TmConfig config,
                                      ParameterSet<T> params)
    : src_vocab_(std::move(source_vocab)),
      tgt_vocab_(std::move(target_vocab)),
      config_(config),
      params_(std::move(params)) {
  validate();
}

template <typename T>
void TranslationModel<T>::validate() const {
  const std::size_t E = config_.embed_size, H = config_.hidden_size;
  auto expect = [&](const std::string& name, const Shape& shape) {
    if (!params_.contains(name)) throw DataError("translation model is missing " + name);
    if (params_.get(name).shape() != shape) {
      throw ShapeError("translation model parameter " + name + " has shape " + shape_str(params_.get(name).shape()) +
                       ", expected " + shape_str(shape));
    }
  };
  auto expect_gru = [&](const std::string& prefix) {
    expect(prefix + ".W", {E, 3 * H});
    expect(prefix + ".U", {H, 3 * H});
    expect(prefix + ".b", {3 * H});
  };
  expect("tm.src_embed", {src_vocab_.size(), E});
  expect_gru("tm.enc.fwd");
  expect_gru("tm.enc.bwd");
  expect("tm.enc.proj.W", {2 * H, H});
  expect("tm.enc.proj.b", {H});
  expect("tm.init.W", {2 * H, H});
  expect("tm.init.b", {H});
  expect("tm.tgt_embed", {tgt_vocab_.size(), E});
  expect_gru("tm.dec");
  expect("tm.attn.W", {H, H});
  expect("tm.comb.W", {2 * H, H});
  expect("tm.comb.b", {H});
  if (config_.output_layer) {
    expect("tm.out.W", {H, tgt_vocab_.size()});
    expect("tm.out.b", {tgt_vocab_.size()});
  }
}

template <typename T>
typename TranslationModel<T>::Graph TranslationModel<T>::bind(const Binder<T>& bind) const {
  const std::size_t H = config_.hidden_size;
  Graph g;
  g.src_embed = bind("tm.src_embed");
  g.tgt_embed = bind("tm.tgt_embed");
  g.fwd = bind_gru(bind, "tm.enc.fwd", H);
  g.bwd = bind_gru(bind, "tm.enc.bwd", H);
  g.dec = bind_gru(bind, "tm.dec", H);
  g.proj_W = bind("tm.enc.proj.W");
  g.proj_b = bind("tm.enc.proj.b");
  g.init_W = bind("tm.init.W");
  g.init_b = bind("tm.init.b");
  g.attn_W = bind("tm.attn.W");
  g.comb_W = bind("tm.comb.W");
  g.comb_b = bind("tm.comb.b");
  g.has_output = config_.output_layer;
  if (g.has_output) {
    g.out_W = bind("tm.out.W");
    g.out_b = bind("tm.out.b");
  }
  return g;
}

template <typename T>
typename TranslationModel<T>::Encoded TranslationModel<T>::encode(const Graph& g, const PaddedBatch& source) const {
  using namespace ops;
  if (source.batch == 0 || source.max_len == 0) throw ContractError("encode: empty source batch");
  for (std::size_t b = 0; b < source.batch; ++b) {
    if (source.lengths[b] == 0) throw ContractError("encode: empty source sentence");
  }
  for (const auto& row : source.ids) check_source(row);
  Tape<T>& tape = *g.src_embed.tape;
  const std::size_t B = source.batch, S = source.max_len, H = config_.hidden_size;

  std::vector<Var<T>> masks(S), embeds(S);
  for (std::size_t t = 0; t < S; ++t) {
    Tensor<T> m(Shape{B, H});
    for (std::size_t b = 0; b < B; ++b) {
      if (t < source.lengths[b]) std::fill(m.data() + b * H, m.data() + (b + 1) * H, T(1));
    }
    masks[t] = tape.input(std::move(m));
    embeds[t] = embedding(g.src_embed, std::span<const int>(source.ids[t]));
  }

  std::vector<Var<T>> fwd(S), bwd(S);
  Var<T> h = zeros(tape, B, H);
  for (std::size_t t = 0; t < S; ++t) {
    h = masked_update(h, gru_step(g.fwd, embeds[t], h), masks[t]);
    fwd[t] = h;
  }
  h = zeros(tape, B, H);
  for (std::size_t t = S; t-- > 0;) {
    h = masked_update(h, gru_step(g.bwd, embeds[t], h), masks[t]);
    bwd[t] = h;
  }

  std::vector<Var<T>> states(S);
  for (std::size_t t = 0; t < S; ++t) states[t] = add_bias(matmul(concat(fwd[t], bwd[t]), g.proj_W), g.proj_b);

  Tensor<T> mask_add(Shape{B, S});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = source.lengths[b]; t < S; ++t) mask_add.at(b, t) = static_cast<T>(kMaskedScore);
  }

  Encoded enc;
  enc.states = stack_steps(std::span<const Var<T>>(states));
  enc.mask_add = tape.input(std::move(mask_add));
  // fwd[S-1] holds each row's last valid forward state thanks to masking.
  enc.init = tanh(add_bias(matmul(concat(fwd[S - 1], bwd[0]), g.init_W), g.init_b));
  return enc;
}

template <typename T>
typename TranslationModel<T>::Step TranslationModel<T>::decode_step(const Graph& g, const Encoded& enc, Var<T> state,
                                                                    std::span<const int> prev) const {
  using namespace ops;
  check_target(prev);
  Var<T> s = gru_step(g.dec, embedding(g.tgt_embed, prev), state);
  Var<T> q = matmul(s, g.attn_W);
  Var<T> alpha = softmax(add(batched_scores(enc.states, q), enc.mask_add));
  Var<T> ctx = batched_context(alpha, enc.states);
  Var<T> s_tm = tanh(add_bias(matmul(concat(s, ctx), g.comb_W), g.comb_b));
  return Step{s, s_tm, alpha};
}

template <typename T>
Var<T> TranslationModel<T>::tm_logits(const Graph& g, Var<T> s_tm) const {
  if (!g.has_output) throw ContractError("tm_logits: this model has no baseline output layer");
  return ops::add_bias(ops::matmul(s_tm, g.out_W), g.out_b);
}

template <typename T>
TmEncoding<T> TranslationModel<T>::encode(std::span<const int> source) const {
  check_source(source);
  Tape<T> tape;
  Graph g = bind(Binder<T>(tape, params_));
  Encoded enc = encode(g, pad_batch({std::vector<int>(source.begin(), source.end())}));
  return TmEncoding<T>{enc.states.value(), enc.mask_add.value(), enc.init.value()};
}

template <typename T>
DecoderStep<T> TranslationModel<T>::decode_step(int prev_target, std::span<const T> state,
                                                const TmEncoding<T>& enc) const {
  if (state.size() != config_.hidden_size) throw ShapeError("decode_step: state has wrong dimension");
  Tape<T> tape;
  Graph g = bind(Binder<T>(tape, params_));
  Encoded e{tape.constant(enc.states), tape.constant(enc.mask), tape.constant(enc.init)};
  Var<T> s = tape.input(Tensor<T>(Shape{1, state.size()}, std::vector<T>(state.begin(), state.end())));
  const int prev[1] = {prev_target};
  Step step = decode_step(g, e, s, prev);
  DecoderStep<T> out{step.state.value().storage(), step.s_tm.value().storage(), step.attention.value().storage(), {}};
  if (g.has_output) out.logits = tm_logits(g, step.s_tm).value().storage();
  return out;
}

template <typename T>
std::vector<T> TranslationModel<T>::tm_logits(std::span<const T> s_tm) const {
  if (s_tm.size() != config_.hidden_size) throw ShapeError("tm_logits: input has wrong dimension");
  Tape<T> tape;
  Graph g = bind(Binder<T>(tape, params_));
  Var<T> s = tape.input(Tensor<T>(Shape{1, s_tm.size()}, std::vector<T>(s_tm.begin(), s_tm.end())));
  return tm_logits(g, s).value().storage();
}

template <typename T>
void TranslationModel<T>::check_source(std::span<const int> ids) const {
  if (ids.empty()) throw ContractError("translation model: empty source sentence");
  for (int id : ids) {
    if (!src_vocab_.valid(id)) throw ContractError("translation model: source id " + std::to_string(id) + " out of range");
  }
}

template <typename T>
void TranslationModel<T>::check_target(std::span<const int> ids) const {
  for (int id : ids) {
    if (!tgt_vocab_.valid(id)) throw ContractError("translation model: target id " + std::to_string(id) + " out of range");
  }
}

template class TranslationModel<float>;
template class TranslationModel<double>;

}  // namespace fusemt
