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

#include "fusemt/decoding.hpp"

#include <cmath>

namespace fusemt {

template <typename T>
std::vector<double> log_softmax(std::span<const T> logits) {
  if (logits.empty()) throw ShapeError("log_softmax: empty input");
  double m = static_cast<double>(logits[0]);
  for (T v : logits) m = std::max(m, static_cast<double>(v));
  double z = 0.0;
  for (T v : logits) z += std::exp(static_cast<double>(v) - m);
  const double lz = m + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(logits[i]) - lz;
  return out;
}

template <typename T>
FusedStepModel<T>::FusedStepModel(const FusedModel<T>& model, std::span<const int> source)
    : model_(&model), enc_(model.tm().encode(source)) {}

template <typename T>
typename FusedStepModel<T>::State FusedStepModel<T>::compute(std::span<const T> dec, int prev,
                                                             std::optional<typename LmBridge<T>::State> lm) const {
  const auto& tm = model_->tm();
  Tape<T> tape;
  const auto tg = tm.bind(Binder<T>(tape, tm.params()));
  const auto hg = model_->bind_head(Binder<T>(tape, model_->head()));
  typename TranslationModel<T>::Encoded e{tape.constant(enc_.states), tape.constant(enc_.mask),
                                          tape.constant(enc_.init)};
  Var<T> s = tape.input(Tensor<T>(Shape{1, dec.size()}, std::vector<T>(dec.begin(), dec.end())));
  const int prev_ids[1] = {prev};
  auto step = tm.decode_step(tg, e, s, prev_ids);

  Var<T> s_lm, p_lm;
  if (lm) {
    s_lm = tape.input(Tensor<T>(Shape{1, lm->logits.size()}, lm->logits));
    p_lm = tape.input(Tensor<T>(Shape{1, lm->probs.size()}, lm->probs));
  }
  DynamicGraph<T> dyn;
  Var<T> logits = model_->final_logits(tg, hg, step.s_tm, s_lm, p_lm, &dyn);

  State out;
  out.dec = step.state.value().storage();
  out.lm = std::move(lm);
  out.log_probs = log_softmax<T>(logits.value().values());
  out.attention = step.attention.value().storage();
  if (model_->variant() == Variant::Dynamic) out.alpha = dyn.alpha.value().storage();
  return out;
}

template <typename T>
typename FusedStepModel<T>::State FusedStepModel<T>::start() const {
  std::optional<typename LmBridge<T>::State> lm;
  if (model_->bridge()) lm = model_->bridge()->start();
  return compute(enc_.init.values(), Vocabulary::kBos, std::move(lm));
}

template <typename T>
typename FusedStepModel<T>::State FusedStepModel<T>::advance(const State& s, int token) const {
  std::optional<typename LmBridge<T>::State> lm;
  if (s.lm) lm = model_->bridge()->advance(*s.lm, token);
  return compute(s.dec, token, std::move(lm));
}

template <typename T>
ShallowStepModel<T>::ShallowStepModel(const TranslationModel<T>& tm, std::shared_ptr<const LanguageModel<T>> lm,
                                      ShallowConfig cfg, std::span<const int> source)
    : tm_(&tm), bridge_(lm, tm.target_vocab()), cfg_(cfg), enc_(tm.encode(source)) {
  if (!bridge_.shared_vocab()) {
    throw VocabularyMismatch("shallow fusion needs identical translation and language-model vocabularies (" +
                             std::to_string(tm.target_vocab().size()) + " vs " + std::to_string(lm->vocab_size()) +
                             " entries)");
  }
  if (!tm.config().output_layer) throw ContractError("shallow fusion needs a translation model with an output layer");
  if (!(cfg_.lambda >= 0.0)) throw ContractError("shallow fusion: lambda must be non-negative");
}

template <typename T>
typename ShallowStepModel<T>::State ShallowStepModel<T>::compute(std::span<const T> dec, int prev,
                                                                 typename LmBridge<T>::State lm) const {
  DecoderStep<T> step = tm_->decode_step(prev, dec, enc_);
  std::vector<double> log_p_lm(lm.probs.size());
  for (std::size_t i = 0; i < log_p_lm.size(); ++i) {
    log_p_lm[i] = std::log(std::max(static_cast<double>(lm.probs[i]), kProbFloor));
  }
  State out;
  out.log_probs = shallow_combine(log_softmax<T>(step.logits), log_p_lm, cfg_);
  out.dec = std::move(step.state);
  out.lm = std::move(lm);
  return out;
}

template <typename T>
typename ShallowStepModel<T>::State ShallowStepModel<T>::start() const {
  return compute(enc_.init.values(), Vocabulary::kBos, bridge_.start());
}

template <typename T>
typename ShallowStepModel<T>::State ShallowStepModel<T>::advance(const State& s, int token) const {
  return compute(s.dec, token, bridge_.advance(s.lm, token));
}

template std::vector<double> log_softmax<float>(std::span<const float>);
template std::vector<double> log_softmax<double>(std::span<const double>);
template class FusedStepModel<float>;
template class FusedStepModel<double>;
template class ShallowStepModel<float>;
template class ShallowStepModel<double>;

static_assert(StepModel<FusedStepModel<float>>);
static_assert(StepModel<ShallowStepModel<double>>);

}  // namespace fusemt
