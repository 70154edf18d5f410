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
#include <vector>

#include "fusemt/autodiff.hpp"
#include "fusemt/nn.hpp"
#include "fusemt/params.hpp"
#include "fusemt/vocabulary.hpp"

namespace fusemt {

struct TmConfig {
  std::size_t embed_size = 64;
  std::size_t hidden_size = 64;
  // The baseline projection S_TM -> logits. Heads that produce their own
  // logits (cold, dynamic) are built without it.
  bool output_layer = true;
  double init_scale = 0.1;
};

// Additive-mask value for padded source positions.
inline constexpr double kMaskedScore = -1e9;

// Encoder output for a single sentence, held outside any tape.
template <typename T>
struct TmEncoding {
  Tensor<T> states;  // [1, S, h]
  Tensor<T> mask;    // [1, S], zeros (single sentence, no padding)
  Tensor<T> init;    // [1, h], initial decoder state
};

template <typename T>
struct DecoderStep {
  std::vector<T> state;      // recurrent decoder state after the step
  std::vector<T> s_tm;       // attentional output state, |h|
  std::vector<T> attention;  // over source positions
  std::vector<T> logits;     // baseline logits; empty without an output layer
};

// Bidirectional GRU encoder, GRU decoder with global multiplicative
// attention and no input feeding:
//   s_t   = GRU(emb(y_{t-1}), s_{t-1})
//   a_t   = softmax(H · (s_t W_a))
//   S_TM  = tanh([s_t ; a_t H] W_c + b_c)
template <typename T>
class TranslationModel {
 public:
  struct Graph {
    Var<T> src_embed, tgt_embed;
    GruVars<T> fwd, bwd, dec;
    Var<T> proj_W, proj_b, init_W, init_b, attn_W, comb_W, comb_b;
    Var<T> out_W, out_b;
    bool has_output = false;
  };
  struct Encoded {
    Var<T> states;    // [B, S, h]
    Var<T> mask_add;  // [B, S]
    Var<T> init;      // [B, h]
  };
  struct Step {
    Var<T> state;      // [B, h]
    Var<T> s_tm;       // [B, h]
    Var<T> attention;  // [B, S]
  };

  TranslationModel(Vocabulary source_vocab, Vocabulary target_vocab, TmConfig config, std::uint64_t seed);
  TranslationModel(Vocabulary source_vocab, Vocabulary target_vocab, TmConfig config, ParameterSet<T> params);

  const Vocabulary& source_vocab() const noexcept { return src_vocab_; }
  const Vocabulary& target_vocab() const noexcept { return tgt_vocab_; }
  const TmConfig& config() const noexcept { return config_; }
  std::size_t hidden_size() const noexcept { return config_.hidden_size; }
  ParameterSet<T>& params() noexcept { return params_; }
  const ParameterSet<T>& params() const noexcept { return params_; }

  Graph bind(const Binder<T>& bind) const;
  Encoded encode(const Graph& g, const PaddedBatch& source) const;
  Step decode_step(const Graph& g, const Encoded& enc, Var<T> state, std::span<const int> prev) const;
  Var<T> tm_logits(const Graph& g, Var<T> s_tm) const;

  // Single-sentence inference.
  TmEncoding<T> encode(std::span<const int> source) const;
  DecoderStep<T> decode_step(int prev_target, std::span<const T> state, const TmEncoding<T>& enc) const;
  std::vector<T> tm_logits(std::span<const T> s_tm) const;

  // Throws ContractError for an empty sentence or ids outside the vocabulary.
  void check_source(std::span<const int> ids) const;
  void check_target(std::span<const int> ids) const;

 private:
  void validate() const;

  Vocabulary src_vocab_;
  Vocabulary tgt_vocab_;
  TmConfig config_;
  ParameterSet<T> params_;
};

extern template class TranslationModel<float>;
extern template class TranslationModel<double>;

}  // namespace fusemt
