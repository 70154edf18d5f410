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
#include <span>
#include <utility>
#include <vector>

#include "fusemt/autodiff.hpp"
#include "fusemt/corpus.hpp"
#include "fusemt/nn.hpp"
#include "fusemt/params.hpp"
#include "fusemt/vocabulary.hpp"

namespace fusemt {

struct LmConfig {
  std::size_t embed_size = 64;
  std::size_t hidden_size = 64;
  // Reuse the embedding table as the output projection (needs embed == hidden).
  bool tie_embeddings = false;
  double init_scale = 0.1;
};

template <typename T>
struct LmState {
  std::vector<T> hidden;
};

template <typename T>
struct LmStepResult {
  LmState<T> state;
  std::vector<T> logits;  // S_LM over the LM vocabulary
};

// Single-layer GRU language model over its own vocabulary.
//
// The output projection starts at zero, so a freshly initialised model
// predicts the uniform distribution regardless of its recurrent weights.
template <typename T>
class LanguageModel {
 public:
  struct Graph {
    Var<T> embed;
    GruVars<T> gru;
    Var<T> out_W;
    Var<T> out_b;
    bool tied = false;
  };

  LanguageModel(Vocabulary vocab, LmConfig config, std::uint64_t seed);
  // Restores a model from saved parameters; shapes are validated.
  LanguageModel(Vocabulary vocab, LmConfig config, ParameterSet<T> params);

  const Vocabulary& vocab() const noexcept { return vocab_; }
  const LmConfig& config() const noexcept { return config_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  std::size_t hidden_size() const noexcept { return config_.hidden_size; }
  ParameterSet<T>& params() noexcept { return params_; }
  const ParameterSet<T>& params() const noexcept { return params_; }

  Graph bind(const Binder<T>& bind) const;
  // Batched step: (state [B,h], prev ids) -> (state', logits [B,V]).
  std::pair<Var<T>, Var<T>> step(const Graph& g, Var<T> state, std::span<const int> prev_ids) const;

  // Summed token cross-entropy of a batch; bos is the first input and eos
  // the last target. `tokens` receives the number of predicted tokens.
  Var<T> batch_loss(const Binder<T>& bind, const std::vector<std::vector<int>>& sentences,
                    std::size_t* tokens) const;

  LmState<T> initial_state() const;
  LmStepResult<T> step(const LmState<T>& state, int prev_token) const;

  template <typename U>
  LanguageModel<U> cast() const {
    return LanguageModel<U>(vocab_, config_, params_.template cast<U>());
  }

 private:
  void validate() const;

  Vocabulary vocab_;
  LmConfig config_;
  ParameterSet<T> params_;
};

// exp of the mean per-token negative log-likelihood (eos included, bos not
// a target). Unknown words map to unk.
template <typename T>
double perplexity(const LanguageModel<T>& lm, const Corpus& corpus);

extern template class LanguageModel<float>;
extern template class LanguageModel<double>;

}  // namespace fusemt
