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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusemt/autodiff.hpp"
#include "fusemt/language_model.hpp"
#include "fusemt/params.hpp"
#include "fusemt/translation_model.hpp"

namespace fusemt {

// Floor applied to LM probabilities before any logarithm.
inline constexpr double kProbFloor = 1e-12;

enum class Variant { Baseline, Cold, PostNorm, PreNorm, Dynamic };

std::string_view variant_name(Variant v);
// Throws ConfigError for unknown names.
Variant parse_variant(std::string_view name);
bool uses_lm(Variant v);
// PostNorm/PreNorm combine distributions elementwise and need V_TM == V_LM.
bool requires_shared_vocab(Variant v);
// Whether the variant predicts through the translation model's own projection.
bool uses_tm_output(Variant v);

// ---------------------------------------------------------------------------
// Pure combiners on single vectors.

struct ShallowConfig {
  double lambda = 0.2;
};

// logP_TM + lambda * logP_LM. Lengths must agree (VocabularyMismatch).
std::vector<double> shallow_combine(std::span<const double> log_p_tm, std::span<const double> log_p_lm,
                                    const ShallowConfig& cfg);

template <typename T>
struct ColdFusionParams {
  Tensor<T> W_LM;      // [h, V_LM]
  Tensor<T> W_gate;    // [2h, h]
  Tensor<T> W_output;  // [2h, V_TM]

  void validate(std::size_t h, std::size_t v_lm, std::size_t v_tm) const;
};

template <typename T>
struct ColdFusionTrace {
  std::vector<T> h_lm;     // W_LM S_LM
  std::vector<T> g;        // sigmoid(W_gate [S_TM; h_LM])
  std::vector<T> h_prime;  // [S_TM; g * h_LM]
  std::vector<T> s_cold;   // W_output h'
};

template <typename T>
ColdFusionTrace<T> cold_fuse(std::span<const T> s_tm, std::span<const T> s_lm, const ColdFusionParams<T>& params);

// softmax(softmax(logits) * P_LM).
std::vector<double> postnorm_combine(std::span<const double> tm_logits, std::span<const double> p_lm);
// softmax(logits + log max(P_LM, floor)).
std::vector<double> prenorm_combine(std::span<const double> tm_logits, std::span<const double> p_lm);

template <typename T>
struct DynamicFusionParams {
  Tensor<T> e_word;  // [V_LM, h]
  Tensor<T> W;       // [2h, V_TM]

  void validate(std::size_t h, std::size_t v_lm, std::size_t v_tm) const;
};

template <typename T>
struct DynamicFusionTrace {
  std::vector<T> alpha;   // word attention over V_LM
  Tensor<T> c_word;       // [V_LM, h], row w = alpha_w * e_w
  std::vector<T> c_lm;    // sum_w c_w * P_LM(w); not renormalised
  std::vector<T> h_tm;    // [S_TM; c_LM]
  std::vector<T> s_attn;  // W h_TM
};

template <typename T>
DynamicFusionTrace<T> dynamic_fuse(std::span<const T> s_tm, std::span<const T> p_lm,
                                   const DynamicFusionParams<T>& params);

// ---------------------------------------------------------------------------
// Differentiable heads. All act row-wise on batches.

template <typename T>
struct ColdGraph {
  Var<T> h_lm, g, h_prime, s_cold;
};
template <typename T>
ColdGraph<T> cold_graph(Var<T> s_tm, Var<T> s_lm, Var<T> W_LM, Var<T> W_gate, Var<T> W_output);

template <typename T>
struct DynamicGraph {
  Var<T> alpha, c_lm, h_tm, s_attn;
};
template <typename T>
DynamicGraph<T> dynamic_graph(Var<T> s_tm, Var<T> p_lm, Var<T> e_word, Var<T> W);

// Pre-softmax scores whose softmax is the PostNorm / PreNorm distribution.
template <typename T>
Var<T> postnorm_graph(Var<T> tm_logits, Var<T> p_lm);
template <typename T>
Var<T> prenorm_graph(Var<T> tm_logits, Var<T> p_lm);

// ---------------------------------------------------------------------------
// Drives a frozen LM alongside a TM target sequence.
//
// With identical vocabularies the LM takes one step per TM token. Otherwise
// TM tokens are subword pieces: pieces ending in "@@" are buffered and the
// LM advances once per completed word, looked up by its surface form.
template <typename T>
class LmBridge {
 public:
  struct State {
    LmState<T> lm;
    std::string pending;
    std::vector<T> logits;  // S_LM for the next prediction
    std::vector<T> probs;   // softmax(S_LM)
  };
  // Rows 0..n of S_LM / P_LM for a target of n tokens (row t predicts y_t;
  // the last row is the prediction position of eos).
  struct Track {
    Tensor<T> logits;
    Tensor<T> probs;
  };

  LmBridge(std::shared_ptr<const LanguageModel<T>> lm, Vocabulary tm_vocab);

  bool shared_vocab() const noexcept { return shared_; }
  const LanguageModel<T>& lm() const { return *lm_; }

  State start() const;
  State advance(const State& state, int tm_token) const;
  Track track(std::span<const int> target) const;

 private:
  State stepped(const State& state, int lm_token) const;

  std::shared_ptr<const LanguageModel<T>> lm_;
  Vocabulary tm_vocab_;
  bool shared_ = false;
};

// ---------------------------------------------------------------------------
// A translation model together with its (frozen) LM and fusion head.
template <typename T>
class FusedModel {
 public:
  struct Example {
    std::vector<int> source;
    std::vector<int> target;  // without bos/eos
    typename LmBridge<T>::Track lm;  // empty unless the variant uses an LM
  };

  // Fresh head parameters drawn from `seed`. The TM must have been built
  // with TmConfig::output_layer == uses_tm_output(variant).
  FusedModel(Variant variant, TranslationModel<T> tm, std::shared_ptr<const LanguageModel<T>> lm,
             std::uint64_t seed);
  FusedModel(Variant variant, TranslationModel<T> tm, std::shared_ptr<const LanguageModel<T>> lm,
             ParameterSet<T> head);

  Variant variant() const noexcept { return variant_; }
  const TranslationModel<T>& tm() const noexcept { return tm_; }
  TranslationModel<T>& tm() noexcept { return tm_; }
  const LanguageModel<T>* lm() const noexcept { return lm_.get(); }
  std::shared_ptr<const LanguageModel<T>> lm_ptr() const noexcept { return lm_; }
  const LmBridge<T>* bridge() const noexcept { return bridge_ ? &*bridge_ : nullptr; }
  ParameterSet<T>& head() noexcept { return head_; }
  const ParameterSet<T>& head() const noexcept { return head_; }
  // Every trainable set (TM first, then head).
  std::vector<ParameterSet<T>*> trainable();

  Example make_example(std::vector<int> source, std::vector<int> target) const;

  // Summed cross-entropy of the head's distribution at every gold target
  // position (eos included). LM parameters are bound as constants.
  Var<T> loss(const Binder<T>& tm_bind, const Binder<T>& head_bind, std::span<const Example* const> batch,
              std::size_t* tokens) const;

  // Head parameters bound on a tape: cold (W_LM, W_gate, W_output) or
  // dynamic (e_word, W); unused slots stay unset.
  struct HeadGraph {
    Var<T> a, b, c;
  };
  HeadGraph bind_head(const Binder<T>& head_bind) const;

  // Pre-softmax scores of the final distribution at one decoder step.
  // s_lm / p_lm are ignored by variants without an LM.
  Var<T> final_logits(const typename TranslationModel<T>::Graph& tg, const HeadGraph& hg, Var<T> s_tm, Var<T> s_lm,
                      Var<T> p_lm, DynamicGraph<T>* dynamic_out = nullptr) const;

  ColdFusionParams<T> cold_params() const;
  DynamicFusionParams<T> dynamic_params() const;

 private:
  void attach_lm();
  void validate_head() const;

  Variant variant_;
  TranslationModel<T> tm_;
  std::shared_ptr<const LanguageModel<T>> lm_;
  std::optional<LmBridge<T>> bridge_;
  ParameterSet<T> head_;
};

extern template class LmBridge<float>;
extern template class LmBridge<double>;
extern template class FusedModel<float>;
extern template class FusedModel<double>;

}  // namespace fusemt
