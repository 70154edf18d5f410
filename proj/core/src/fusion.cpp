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

#include "fusemt/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "fusemt/bpe.hpp"

namespace fusemt {

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 5> kVariantNames = {{
    {Variant::Baseline, "baseline"},
    {Variant::Cold, "cold"},
    {Variant::PostNorm, "postnorm"},
    {Variant::PreNorm, "prenorm"},
    {Variant::Dynamic, "dynamic"},
}};

std::vector<double> softmax_vec(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += out[i] = std::exp(x[i] - m);
  for (double& v : out) v /= z;
  return out;
}

void check_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw VocabularyMismatch(std::string(what) + ": translation vocabulary has " + std::to_string(a) +
                             " entries but the language model has " + std::to_string(b));
  }
  if (a == 0) throw ShapeError(std::string(what) + ": empty input");
}

void check_shape(const char* what, const Shape& got, const Shape& want) {
  if (got != want) throw ShapeError(std::string(what) + " has shape " + shape_str(got) + ", expected " + shape_str(want));
}

template <typename T>
Tensor<T> row(std::span<const T> v) {
  return Tensor<T>(Shape{1, v.size()}, std::vector<T>(v.begin(), v.end()));
}

}  // namespace

std::string_view variant_name(Variant v) {
  for (const auto& [k, name] : kVariantNames) {
    if (k == v) return name;
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (const auto& [k, n] : kVariantNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

bool uses_lm(Variant v) { return v != Variant::Baseline; }
bool requires_shared_vocab(Variant v) { return v == Variant::PostNorm || v == Variant::PreNorm; }
bool uses_tm_output(Variant v) { return v == Variant::Baseline || v == Variant::PostNorm || v == Variant::PreNorm; }

std::vector<double> shallow_combine(std::span<const double> log_p_tm, std::span<const double> log_p_lm,
                                    const ShallowConfig& cfg) {
  check_same_length(log_p_tm.size(), log_p_lm.size(), "shallow fusion");
  if (!(cfg.lambda >= 0.0)) throw ContractError("shallow fusion: lambda must be non-negative");
  std::vector<double> out(log_p_tm.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // lambda = 0 must reproduce log P_TM exactly, even where log P_LM = -inf.
    out[i] = cfg.lambda == 0.0 ? log_p_tm[i] : log_p_tm[i] + cfg.lambda * log_p_lm[i];
  }
  return out;
}

std::vector<double> postnorm_combine(std::span<const double> tm_logits, std::span<const double> p_lm) {
  check_same_length(tm_logits.size(), p_lm.size(), "postnorm fusion");
  std::vector<double> prod = softmax_vec(tm_logits);
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] *= p_lm[i];
  return softmax_vec(prod);
}

std::vector<double> prenorm_combine(std::span<const double> tm_logits, std::span<const double> p_lm) {
  check_same_length(tm_logits.size(), p_lm.size(), "prenorm fusion");
  std::vector<double> s(tm_logits.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = tm_logits[i] + std::log(std::max(p_lm[i], kProbFloor));
  return softmax_vec(s);
}

template <typename T>
void ColdFusionParams<T>::validate(std::size_t h, std::size_t v_lm, std::size_t v_tm) const {
  check_shape("cold fusion W_LM", W_LM.shape(), {h, v_lm});
  check_shape("cold fusion W_gate", W_gate.shape(), {2 * h, h});
  check_shape("cold fusion W_output", W_output.shape(), {2 * h, v_tm});
}

template <typename T>
void DynamicFusionParams<T>::validate(std::size_t h, std::size_t v_lm, std::size_t v_tm) const {
  check_shape("dynamic fusion e_word", e_word.shape(), {v_lm, h});
  check_shape("dynamic fusion W", W.shape(), {2 * h, v_tm});
  if (!e_word.all_finite()) throw NumericError("dynamic fusion e_word has non-finite entries");
}

template <typename T>
ColdGraph<T> cold_graph(Var<T> s_tm, Var<T> s_lm, Var<T> W_LM, Var<T> W_gate, Var<T> W_output) {
  using namespace ops;
  ColdGraph<T> g;
  g.h_lm = matmul_nt(s_lm, W_LM);
  g.g = sigmoid(matmul(concat(s_tm, g.h_lm), W_gate));
  g.h_prime = concat(s_tm, mul(g.g, g.h_lm));
  g.s_cold = matmul(g.h_prime, W_output);
  return g;
}

template <typename T>
DynamicGraph<T> dynamic_graph(Var<T> s_tm, Var<T> p_lm, Var<T> e_word, Var<T> W) {
  using namespace ops;
  DynamicGraph<T> g;
  g.alpha = softmax(matmul_nt(s_tm, e_word));
  g.c_lm = matmul(mul(g.alpha, p_lm), e_word);
  g.h_tm = concat(s_tm, g.c_lm);
  g.s_attn = matmul(g.h_tm, W);
  return g;
}

template <typename T>
Var<T> postnorm_graph(Var<T> tm_logits, Var<T> p_lm) {
  return ops::mul(ops::softmax(tm_logits), p_lm);
}

template <typename T>
Var<T> prenorm_graph(Var<T> tm_logits, Var<T> p_lm) {
  return ops::add(tm_logits, ops::log_floor(p_lm, static_cast<T>(kProbFloor)));
}

template <typename T>
ColdFusionTrace<T> cold_fuse(std::span<const T> s_tm, std::span<const T> s_lm, const ColdFusionParams<T>& params) {
  const std::size_t h = s_tm.size();
  if (h == 0) throw ShapeError("cold fusion: empty S_TM");
  params.validate(h, s_lm.size(), params.W_output.cols());
  Tape<T> tape;
  ColdGraph<T> g = cold_graph(tape.input(row(s_tm)), tape.input(row(s_lm)), tape.constant(params.W_LM),
                              tape.constant(params.W_gate), tape.constant(params.W_output));
  return ColdFusionTrace<T>{g.h_lm.value().storage(), g.g.value().storage(), g.h_prime.value().storage(),
                            g.s_cold.value().storage()};
}

template <typename T>
DynamicFusionTrace<T> dynamic_fuse(std::span<const T> s_tm, std::span<const T> p_lm,
                                   const DynamicFusionParams<T>& params) {
  const std::size_t h = s_tm.size();
  if (h == 0) throw ShapeError("dynamic fusion: empty S_TM");
  params.validate(h, p_lm.size(), params.W.cols());
  Tape<T> tape;
  DynamicGraph<T> g = dynamic_graph(tape.input(row(s_tm)), tape.input(row(p_lm)), tape.constant(params.e_word),
                                    tape.constant(params.W));
  DynamicFusionTrace<T> tr;
  tr.alpha = g.alpha.value().storage();
  tr.c_word = Tensor<T>(params.e_word.shape());
  for (std::size_t w = 0; w < p_lm.size(); ++w) {
    for (std::size_t j = 0; j < h; ++j) tr.c_word.at(w, j) = tr.alpha[w] * params.e_word.at(w, j);
  }
  tr.c_lm = g.c_lm.value().storage();
  tr.h_tm = g.h_tm.value().storage();
  tr.s_attn = g.s_attn.value().storage();
  return tr;
}

// ---------------------------------------------------------------------------

template <typename T>
LmBridge<T>::LmBridge(std::shared_ptr<const LanguageModel<T>> lm, Vocabulary tm_vocab)
    : lm_(std::move(lm)), tm_vocab_(std::move(tm_vocab)) {
  if (!lm_) throw ConfigError("language model bridge needs a language model");
  shared_ = lm_->vocab() == tm_vocab_;
}

template <typename T>
typename LmBridge<T>::State LmBridge<T>::stepped(const State& state, int lm_token) const {
  auto r = lm_->step(state.lm, lm_token);
  State next;
  next.lm = std::move(r.state);
  next.logits = std::move(r.logits);
  next.probs.resize(next.logits.size());
  const T m = *std::max_element(next.logits.begin(), next.logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < next.logits.size(); ++i) z += std::exp(static_cast<double>(next.logits[i] - m));
  for (std::size_t i = 0; i < next.logits.size(); ++i) {
    next.probs[i] = static_cast<T>(std::exp(static_cast<double>(next.logits[i] - m)) / z);
  }
  return next;
}

template <typename T>
typename LmBridge<T>::State LmBridge<T>::start() const {
  State s;
  s.lm = lm_->initial_state();
  return stepped(s, Vocabulary::kBos);
}

template <typename T>
typename LmBridge<T>::State LmBridge<T>::advance(const State& state, int tm_token) const {
  if (!tm_vocab_.valid(tm_token)) throw ContractError("language model bridge: token id out of range");
  if (tm_token == Vocabulary::kEos) return state;
  if (shared_) return stepped(state, tm_token);
  const std::string& piece = tm_vocab_.token(tm_token);
  if (BpeModel::continues(piece)) {
    State next = state;
    next.pending += piece.substr(0, piece.size() - BpeModel::kContinuation.size());
    return next;
  }
  State next = stepped(state, lm_->vocab().id(state.pending + piece));
  next.pending.clear();
  return next;
}

template <typename T>
typename LmBridge<T>::Track LmBridge<T>::track(std::span<const int> target) const {
  const std::size_t V = lm_->vocab_size();
  Track tr{Tensor<T>(Shape{target.size() + 1, V}), Tensor<T>(Shape{target.size() + 1, V})};
  State s = start();
  for (std::size_t t = 0;; ++t) {
    std::copy(s.logits.begin(), s.logits.end(), tr.logits.data() + t * V);
    std::copy(s.probs.begin(), s.probs.end(), tr.probs.data() + t * V);
    if (t == target.size()) break;
    s = advance(s, target[t]);
  }
  return tr;
}

// ---------------------------------------------------------------------------

template <typename T>
FusedModel<T>::FusedModel(Variant variant, TranslationModel<T> tm, std::shared_ptr<const LanguageModel<T>> lm,
                          ParameterSet<T> head)
    : variant_(variant), tm_(std::move(tm)), lm_(std::move(lm)), head_(std::move(head)) {
  attach_lm();
  validate_head();
}

template <typename T>
FusedModel<T>::FusedModel(Variant variant, TranslationModel<T> tm, std::shared_ptr<const LanguageModel<T>> lm,
                          std::uint64_t seed)
    : variant_(variant), tm_(std::move(tm)), lm_(std::move(lm)) {
  attach_lm();
  Rng rng(seed ^ 0x5bd1e995ULL);
  const double scale = tm_.config().init_scale;
  const std::size_t h = tm_.hidden_size(), v_tm = tm_.target_vocab().size();
  if (variant_ == Variant::Cold) {
    Tensor<T> w_lm(Shape{h, lm_->vocab_size()}), w_gate(Shape{2 * h, h});
    fill_uniform(w_lm, rng, scale);
    fill_uniform(w_gate, rng, scale);
    head_.add("cold.W_LM", std::move(w_lm));
    head_.add("cold.W_gate", std::move(w_gate));
    head_.add("cold.W_output", Tensor<T>(Shape{2 * h, v_tm}));
  } else if (variant_ == Variant::Dynamic) {
    Tensor<T> e_word(Shape{lm_->vocab_size(), h});
    fill_uniform(e_word, rng, scale);
    head_.add("dyn.e_word", std::move(e_word));
    head_.add("dyn.W", Tensor<T>(Shape{2 * h, v_tm}));
  }
  validate_head();
}

template <typename T>
void FusedModel<T>::attach_lm() {
  if (tm_.config().output_layer != uses_tm_output(variant_)) {
    throw ContractError(std::string("variant ") + std::string(variant_name(variant_)) +
                        (uses_tm_output(variant_) ? " needs" : " must not have") +
                        " a translation-model output layer");
  }
  if (!uses_lm(variant_)) {
    lm_.reset();
    return;
  }
  if (!lm_) throw ConfigError(std::string(variant_name(variant_)) + " fusion needs a trained language model");
  if (requires_shared_vocab(variant_) && !(lm_->vocab() == tm_.target_vocab())) {
    throw VocabularyMismatch(std::string(variant_name(variant_)) +
                             " fusion multiplies distributions elementwise and needs identical vocabularies; "
                             "translation target has " +
                             std::to_string(tm_.target_vocab().size()) + " entries, language model " +
                             std::to_string(lm_->vocab_size()));
  }
  bridge_.emplace(lm_, tm_.target_vocab());
}

template <typename T>
void FusedModel<T>::validate_head() const {
  const std::size_t h = tm_.hidden_size(), v_tm = tm_.target_vocab().size();
  std::vector<std::string> expected;
  if (variant_ == Variant::Cold) expected = {"cold.W_LM", "cold.W_gate", "cold.W_output"};
  if (variant_ == Variant::Dynamic) expected = {"dyn.W", "dyn.e_word"};
  for (const auto& name : expected) {
    if (!head_.contains(name)) throw DataError("fusion head is missing " + name);
  }
  if (head_.size() != expected.size()) throw DataError("fusion head has unexpected parameters");
  if (variant_ == Variant::Cold) cold_params().validate(h, lm_->vocab_size(), v_tm);
  if (variant_ == Variant::Dynamic) dynamic_params().validate(h, lm_->vocab_size(), v_tm);
}

template <typename T>
std::vector<ParameterSet<T>*> FusedModel<T>::trainable() {
  return {&tm_.params(), &head_};
}

template <typename T>
ColdFusionParams<T> FusedModel<T>::cold_params() const {
  if (variant_ != Variant::Cold) throw ContractError("not a cold fusion model");
  return {head_.get("cold.W_LM"), head_.get("cold.W_gate"), head_.get("cold.W_output")};
}

template <typename T>
DynamicFusionParams<T> FusedModel<T>::dynamic_params() const {
  if (variant_ != Variant::Dynamic) throw ContractError("not a dynamic fusion model");
  return {head_.get("dyn.e_word"), head_.get("dyn.W")};
}

template <typename T>
typename FusedModel<T>::Example FusedModel<T>::make_example(std::vector<int> source, std::vector<int> target) const {
  tm_.check_source(source);
  tm_.check_target(target);
  Example ex{std::move(source), std::move(target), {}};
  if (bridge_) ex.lm = bridge_->track(ex.target);
  return ex;
}

template <typename T>
typename FusedModel<T>::HeadGraph FusedModel<T>::bind_head(const Binder<T>& head_bind) const {
  HeadGraph hg;
  if (variant_ == Variant::Cold) {
    hg.a = head_bind("cold.W_LM");
    hg.b = head_bind("cold.W_gate");
    hg.c = head_bind("cold.W_output");
  } else if (variant_ == Variant::Dynamic) {
    hg.a = head_bind("dyn.e_word");
    hg.b = head_bind("dyn.W");
  }
  return hg;
}

template <typename T>
Var<T> FusedModel<T>::final_logits(const typename TranslationModel<T>::Graph& tg, const HeadGraph& hg, Var<T> s_tm,
                                   Var<T> s_lm, Var<T> p_lm, DynamicGraph<T>* dynamic_out) const {
  switch (variant_) {
    case Variant::Baseline:
      return tm_.tm_logits(tg, s_tm);
    case Variant::PostNorm:
      return postnorm_graph(tm_.tm_logits(tg, s_tm), p_lm);
    case Variant::PreNorm:
      return prenorm_graph(tm_.tm_logits(tg, s_tm), p_lm);
    case Variant::Cold:
      return cold_graph(s_tm, s_lm, hg.a, hg.b, hg.c).s_cold;
    case Variant::Dynamic: {
      DynamicGraph<T> g = dynamic_graph(s_tm, p_lm, hg.a, hg.b);
      if (dynamic_out) *dynamic_out = g;
      return g.s_attn;
    }
  }
  throw ContractError("unknown variant");
}

template <typename T>
Var<T> FusedModel<T>::loss(const Binder<T>& tm_bind, const Binder<T>& head_bind, std::span<const Example* const> batch,
                           std::size_t* tokens) const {
  if (batch.empty()) throw ContractError("fused loss: empty batch");
  Tape<T>& tape = tm_bind.tape();
  const auto tg = tm_.bind(tm_bind);
  const HeadGraph hg = bind_head(head_bind);
  const std::size_t B = batch.size();

  std::vector<std::vector<int>> sources, targets;
  for (const Example* ex : batch) {
    sources.push_back(ex->source);
    auto t = ex->target;
    t.push_back(Vocabulary::kEos);
    tm_.check_target(t);
    if (uses_lm(variant_) && ex->lm.logits.rows() != t.size()) {
      throw ContractError("fused loss: example lacks a language-model track");
    }
    targets.push_back(std::move(t));
  }
  const PaddedBatch src = pad_batch(sources);
  const PaddedBatch tgt = pad_batch(targets);
  const auto enc = tm_.encode(tg, src);

  const std::size_t V_lm = lm_ ? lm_->vocab_size() : 0;
  Var<T> state = enc.init;
  std::vector<int> prev(B, Vocabulary::kBos);
  std::vector<Var<T>> losses;
  std::size_t count = 0;
  for (std::size_t t = 0; t < tgt.max_len; ++t) {
    auto step = tm_.decode_step(tg, enc, state, prev);
    state = step.state;
    Var<T> s_lm, p_lm;
    if (lm_) {
      Tensor<T> sl(Shape{B, V_lm}), pl(Shape{B, V_lm}, static_cast<T>(1.0 / static_cast<double>(V_lm)));
      for (std::size_t b = 0; b < B; ++b) {
        if (t >= tgt.lengths[b]) continue;
        const auto& tr = batch[b]->lm;
        std::copy_n(tr.logits.data() + t * V_lm, V_lm, sl.data() + b * V_lm);
        std::copy_n(tr.probs.data() + t * V_lm, V_lm, pl.data() + b * V_lm);
      }
      s_lm = tape.input(std::move(sl));
      p_lm = tape.input(std::move(pl));
    }
    Var<T> logits = final_logits(tg, hg, step.s_tm, s_lm, p_lm);
    std::vector<T> w(B);
    for (std::size_t b = 0; b < B; ++b) {
      const bool live = t < tgt.lengths[b];
      w[b] = live ? T(1) : T(0);
      count += live ? 1 : 0;
    }
    losses.push_back(ops::cross_entropy(logits, std::span<const int>(tgt.ids[t]), std::span<const T>(w)));
    prev = tgt.ids[t];
  }
  if (tokens) *tokens = count;
  Var<T> total = losses.front();
  for (std::size_t i = 1; i < losses.size(); ++i) total = ops::add(total, losses[i]);
  return total;
}

#define FUSEMT_INSTANTIATE_FUSION(T)                                                                           \
  template struct ColdFusionParams<T>;                                                                         \
  template struct DynamicFusionParams<T>;                                                                      \
  template ColdGraph<T> cold_graph<T>(Var<T>, Var<T>, Var<T>, Var<T>, Var<T>);                                 \
  template DynamicGraph<T> dynamic_graph<T>(Var<T>, Var<T>, Var<T>, Var<T>);                                   \
  template Var<T> postnorm_graph<T>(Var<T>, Var<T>);                                                           \
  template Var<T> prenorm_graph<T>(Var<T>, Var<T>);                                                            \
  template ColdFusionTrace<T> cold_fuse<T>(std::span<const T>, std::span<const T>, const ColdFusionParams<T>&); \
  template DynamicFusionTrace<T> dynamic_fuse<T>(std::span<const T>, std::span<const T>,                       \
                                                 const DynamicFusionParams<T>&);                               \
  template class LmBridge<T>;                                                                                  \
  template class FusedModel<T>;

FUSEMT_INSTANTIATE_FUSION(float)
FUSEMT_INSTANTIATE_FUSION(double)

#undef FUSEMT_INSTANTIATE_FUSION

}  // namespace fusemt
