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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fusemt/bpe.hpp"
#include "fusemt/corpus.hpp"
#include "fusemt/fusion.hpp"
#include "fusemt/language_model.hpp"
#include "fusemt/params.hpp"
#include "fusemt/translation_model.hpp"
#include "fusemt/vocabulary.hpp"

namespace fusemt {

struct TrainConfig {
  double learning_rate = 0.03;
  std::size_t batch_size = 16;
  std::size_t pretrain_epochs = 15;
  std::size_t max_epochs = 30;
  std::size_t max_tokens = 60;
  std::uint64_t seed = 1;
  std::size_t embed_size = 64;
  std::size_t hidden_size = 64;
  std::size_t vocab_size = 200;
  std::size_t bpe_ops = 0;  // 0 keeps word-level tokens
  double init_scale = 0.1;
  double clip_norm = 0.0;       // global gradient-norm clip; 0 disables
  bool select_by_bleu = false;  // dev BLEU (greedy) instead of dev loss

  // Sizes from the large-scale setup: rate 0.01, batch 128, 15 pre-training
  // epochs, 100 epochs, 60-token limit, 512-dim layers, 30k vocabulary and
  // 16k merges.
  static TrainConfig paper();
  // Small defaults that train in minutes on one core.
  static TrainConfig desk();
  // ConfigError unless every size and the rate are positive.
  void validate() const;
};

// ---------------------------------------------------------------------------

inline constexpr double kAdagradEpsilon = 1e-8;

template <typename T>
struct AdagradState {
  std::map<std::string, std::vector<T>, std::less<>> accum;
  double epsilon = kAdagradEpsilon;
};

// accum += g^2; p -= lr * g / sqrt(accum + eps), using each tensor's grad().
// A non-finite gradient raises NumericError naming the parameter, before
// anything is modified.
template <typename T>
void adagrad_update(ParameterSet<T>& params, AdagradState<T>& state, double lr);

// Scales every gradient so the global L2 norm is at most max_norm; returns
// the norm before clipping.
template <typename T>
double clip_gradients(const std::vector<ParameterSet<T>*>& sets, double max_norm);

// Groups indices of similar length. Batches are formed from a stable sort
// by `lengths`; their order is then shuffled by `rng`.
std::vector<std::vector<std::size_t>> length_batches(const std::vector<std::size_t>& lengths, std::size_t batch_size,
                                                     Rng& rng);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per target token
  double dev_loss = 0.0;    // NaN without dev data
  double seconds = 0.0;
  std::optional<double> dev_bleu;
};

// "epoch<TAB>train_loss<TAB>dev_loss<TAB>seconds".
std::string format_epoch(const EpochLog& log);

struct TrainReport {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;  // 0: the initial or final parameters were kept
  bool stopped_early = false;
};

// Called after every epoch; returning false stops training.
using EpochCallback = std::function<bool(const EpochLog&)>;

// Trains on encoded sentences for `epochs` epochs.
template <typename T>
TrainReport train_lm(LanguageModel<T>& lm, const std::vector<std::vector<int>>& train,
                     const std::vector<std::vector<int>>* dev, const TrainConfig& cfg, std::size_t epochs,
                     const EpochCallback& on_epoch = {});

// Trains TM and head parameters for cfg.max_epochs with the LM frozen.
// Examples whose source or target exceeds max_tokens are skipped. With dev
// data the parameters of the best finite dev epoch are restored at the end.
template <typename T>
TrainReport train_tm(FusedModel<T>& model, const std::vector<typename FusedModel<T>::Example>& train,
                     const std::vector<typename FusedModel<T>::Example>* dev, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {});

// Summed loss over examples and the number of target tokens scored.
template <typename T>
std::pair<double, std::size_t> evaluate_loss(const FusedModel<T>& model,
                                             const std::vector<typename FusedModel<T>::Example>& data,
                                             std::size_t batch_size);

// ---------------------------------------------------------------------------

// Subword models and vocabularies derived from the training data.
struct TextPipeline {
  std::optional<BpeModel> source_bpe;
  std::optional<BpeModel> target_bpe;
  Vocabulary source_vocab;
  Vocabulary target_vocab;

  static TextPipeline build(const ParallelCorpus& train, const TrainConfig& cfg);
  Sentence segment_source(const Sentence& s) const;
  Sentence segment_target(const Sentence& s) const;
  // Undo target segmentation.
  Sentence join_target(const Sentence& pieces) const;
};

// Encodes raw sentences through an optional BPE model and a vocabulary.
std::vector<int> encode_sentence(const Sentence& s, const std::optional<BpeModel>& bpe, const Vocabulary& vocab);

template <typename T>
std::vector<typename FusedModel<T>::Example> make_examples(const FusedModel<T>& model, const TextPipeline& text,
                                                           const ParallelCorpus& corpus);

template <typename T>
struct TwoStageResult {
  std::unique_ptr<FusedModel<T>> model;
  std::shared_ptr<const LanguageModel<T>> lm;
  TextPipeline text;
  TrainReport lm_report;
  TrainReport tm_report;
  std::uint64_t lm_checksum_before = 0;
  std::uint64_t lm_checksum_after = 0;
};

struct TwoStageHooks {
  EpochCallback on_lm_epoch;
  EpochCallback on_tm_epoch;
};

// Stage 1 trains a language model on `monolingual` (segmented and encoded
// exactly like the translation targets, so vocabularies are shared) unless
// `pretrained_lm` is given. Stage 2 trains the translation model and head
// with the LM frozen. The baseline skips stage 1 and ignores both LM inputs.
// `text` supplies prepared vocabularies and BPE models instead of deriving
// them from `train`.
template <typename T>
TwoStageResult<T> train_two_stage(const ParallelCorpus& train, const ParallelCorpus* dev, const Corpus* monolingual,
                                  Variant variant, const TrainConfig& cfg,
                                  std::shared_ptr<const LanguageModel<T>> pretrained_lm = nullptr,
                                  const TwoStageHooks& hooks = {}, std::optional<TextPipeline> text = std::nullopt);

// Greedy (or beam) translation of raw source sentences; output is joined
// back into words.
template <typename T>
Corpus translate_corpus(const FusedModel<T>& model, const TextPipeline& text, const Corpus& sources,
                        std::size_t beam = 1, std::size_t max_len = 100);

}  // namespace fusemt
