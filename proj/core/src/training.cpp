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

#include "fusemt/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "fusemt/decoding.hpp"
#include "fusemt/evaluation.hpp"

namespace fusemt {

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.learning_rate = 0.01;
  c.batch_size = 128;
  c.pretrain_epochs = 15;
  c.max_epochs = 100;
  c.max_tokens = 60;
  c.embed_size = 512;
  c.hidden_size = 512;
  c.vocab_size = 30000;
  c.bpe_ops = 16000;
  return c;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(learning_rate, "learning_rate");
  positive(static_cast<double>(batch_size), "batch_size");
  positive(static_cast<double>(max_tokens), "max_tokens");
  positive(static_cast<double>(embed_size), "embed_size");
  positive(static_cast<double>(hidden_size), "hidden_size");
  positive(init_scale, "init_scale");
  if (vocab_size <= Vocabulary::kReserved) throw ConfigError("vocab_size must exceed the 4 reserved entries");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
}

// ---------------------------------------------------------------------------

template <typename T>
void adagrad_update(ParameterSet<T>& params, AdagradState<T>& state, double lr) {
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    if (p.grad().size() != p.size()) throw ShapeError("adagrad: gradient of " + name + " has the wrong size");
    for (T g : p.grad()) {
      if (!std::isfinite(static_cast<double>(g))) throw NumericError("adagrad: non-finite gradient in " + name);
    }
  }
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    auto it = state.accum.find(name);
    if (it == state.accum.end()) it = state.accum.emplace(name, std::vector<T>(p.size(), T(0))).first;
    auto& acc = it->second;
    auto g = p.grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc[i] += g[i] * g[i];
      p[i] -= static_cast<T>(lr * static_cast<double>(g[i]) / std::sqrt(static_cast<double>(acc[i]) + state.epsilon));
    }
  }
}

template <typename T>
double clip_gradients(const std::vector<ParameterSet<T>*>& sets, double max_norm) {
  double sq = 0.0;
  for (auto* set : sets) {
    for (auto& [name, p] : *set) {
      for (T g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T f = static_cast<T>(max_norm / norm);
    for (auto* set : sets) {
      for (auto& [name, p] : *set) {
        for (T& g : p.grad()) g *= f;
      }
    }
  }
  return norm;
}

std::vector<std::vector<std::size_t>> length_batches(const std::vector<std::size_t>& lengths, std::size_t batch_size,
                                                     Rng& rng) {
  if (batch_size == 0) throw ContractError("length_batches: batch_size must be positive");
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  // Fisher-Yates with our own index draw, independent of the standard
  // library's shuffle implementation.
  for (std::size_t i = batches.size(); i > 1; --i) std::swap(batches[i - 1], batches[uniform_index(rng, i)]);
  return batches;
}

std::string format_epoch(const EpochLog& log) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.3f", log.epoch, log.train_loss, log.dev_loss, log.seconds);
  return buf;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename T>
std::pair<double, std::size_t> lm_loss(const LanguageModel<T>& lm, const std::vector<std::vector<int>>& data,
                                       std::size_t batch_size) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < data.size(); i += batch_size) {
    std::vector<std::vector<int>> batch(data.begin() + static_cast<std::ptrdiff_t>(i),
                                        data.begin() + static_cast<std::ptrdiff_t>(std::min(data.size(), i + batch_size)));
    Tape<T> tape;
    std::size_t n = 0;
    total += static_cast<double>(lm.batch_loss(Binder<T>(tape, lm.params()), batch, &n).value().item());
    tokens += n;
  }
  return {total, tokens};
}

template <typename T>
double corpus_bleu_ids(const FusedModel<T>& model, const std::vector<typename FusedModel<T>::Example>& data) {
  Corpus hyps, refs;
  const auto& vocab = model.tm().target_vocab();
  for (const auto& ex : data) {
    FusedStepModel<T> step(model, ex.source);
    auto hyp = greedy_decode(step, 2 * ex.source.size() + 10);
    hyps.push_back(vocab.decode(hyp.tokens));
    refs.push_back(vocab.decode(ex.target));
  }
  return bleu(hyps, refs);
}

}  // namespace

template <typename T>
TrainReport train_lm(LanguageModel<T>& lm, const std::vector<std::vector<int>>& train,
                     const std::vector<std::vector<int>>* dev, const TrainConfig& cfg, std::size_t epochs,
                     const EpochCallback& on_epoch) {
  cfg.validate();
  std::vector<std::vector<int>> data;
  for (const auto& s : train) {
    if (s.size() <= cfg.max_tokens) data.push_back(s);
  }
  if (data.empty()) throw DataError("train_lm: no training sentences within max_tokens");
  std::vector<std::size_t> lengths;
  for (const auto& s : data) lengths.push_back(s.size());

  TrainReport report;
  if (epochs == 0) return report;
  Rng rng(cfg.seed ^ 0x1f83d9abfb41bd6bULL);
  AdagradState<T> opt;
  lm.params().set_requires_grad(true);
  std::optional<ParameterSet<T>> best;
  double best_dev = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& idx : length_batches(lengths, cfg.batch_size, rng)) {
      std::vector<std::vector<int>> batch;
      for (std::size_t i : idx) batch.push_back(data[i]);
      lm.params().zero_grad();
      Tape<T> tape;
      std::size_t n = 0;
      Var<T> loss = lm.batch_loss(Binder<T>(tape, lm.params()), batch, &n);
      total += static_cast<double>(loss.value().item());
      tokens += n;
      tape.backward(ops::scale(loss, static_cast<T>(1.0 / static_cast<double>(n))));
      if (cfg.clip_norm > 0.0) clip_gradients<T>({&lm.params()}, cfg.clip_norm);
      adagrad_update(lm.params(), opt, cfg.learning_rate);
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = total / static_cast<double>(tokens);
    if (!std::isfinite(log.train_loss)) throw NumericError("train_lm: training loss diverged at epoch " + std::to_string(epoch));
    log.dev_loss = std::numeric_limits<double>::quiet_NaN();
    if (dev && !dev->empty()) {
      auto [d, n] = lm_loss(lm, *dev, cfg.batch_size);
      log.dev_loss = d / static_cast<double>(n);
      if (std::isfinite(log.dev_loss) && log.dev_loss < best_dev) {
        best_dev = log.dev_loss;
        best = lm.params();
        report.best_epoch = epoch;
      }
    }
    log.seconds = seconds_since(t0);
    report.epochs.push_back(log);
    if (on_epoch && !on_epoch(log)) {
      report.stopped_early = true;
      break;
    }
  }
  if (best) lm.params() = std::move(*best);
  lm.params().set_requires_grad(false);
  return report;
}

template <typename T>
std::pair<double, std::size_t> evaluate_loss(const FusedModel<T>& model,
                                             const std::vector<typename FusedModel<T>::Example>& data,
                                             std::size_t batch_size) {
  using Example = typename FusedModel<T>::Example;
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < data.size(); i += batch_size) {
    std::vector<const Example*> batch;
    for (std::size_t j = i; j < std::min(data.size(), i + batch_size); ++j) batch.push_back(&data[j]);
    Tape<T> tape;
    std::size_t n = 0;
    Var<T> loss = model.loss(Binder<T>(tape, model.tm().params()), Binder<T>(tape, model.head()),
                             std::span<const Example* const>(batch), &n);
    total += static_cast<double>(loss.value().item());
    tokens += n;
  }
  return {total, tokens};
}

template <typename T>
TrainReport train_tm(FusedModel<T>& model, const std::vector<typename FusedModel<T>::Example>& train,
                     const std::vector<typename FusedModel<T>::Example>* dev, const TrainConfig& cfg,
                     const EpochCallback& on_epoch) {
  using Example = typename FusedModel<T>::Example;
  cfg.validate();
  std::vector<const Example*> data;
  for (const auto& ex : train) {
    if (ex.source.size() <= cfg.max_tokens && ex.target.size() <= cfg.max_tokens) data.push_back(&ex);
  }
  if (data.empty()) throw DataError("train_tm: no training pairs within max_tokens");
  std::vector<std::size_t> lengths;
  for (const auto* ex : data) lengths.push_back(ex->target.size() * 1000 + ex->source.size());

  TrainReport report;
  Rng rng(cfg.seed ^ 0x2545f4914f6cdd1dULL);
  AdagradState<T> tm_opt, head_opt;
  auto sets = model.trainable();
  for (auto* s : sets) s->set_requires_grad(true);
  std::optional<std::pair<ParameterSet<T>, ParameterSet<T>>> best;
  double best_score = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& idx : length_batches(lengths, cfg.batch_size, rng)) {
      std::vector<const Example*> batch;
      for (std::size_t i : idx) batch.push_back(data[i]);
      for (auto* s : sets) s->zero_grad();
      Tape<T> tape;
      std::size_t n = 0;
      Var<T> loss = model.loss(Binder<T>(tape, model.tm().params()), Binder<T>(tape, model.head()),
                               std::span<const Example* const>(batch), &n);
      total += static_cast<double>(loss.value().item());
      tokens += n;
      tape.backward(ops::scale(loss, static_cast<T>(1.0 / static_cast<double>(n))));
      if (cfg.clip_norm > 0.0) clip_gradients<T>(sets, cfg.clip_norm);
      adagrad_update(model.tm().params(), tm_opt, cfg.learning_rate);
      adagrad_update(model.head(), head_opt, cfg.learning_rate);
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = total / static_cast<double>(tokens);
    if (!std::isfinite(log.train_loss)) throw NumericError("train_tm: training loss diverged at epoch " + std::to_string(epoch));
    log.dev_loss = std::numeric_limits<double>::quiet_NaN();
    if (dev && !dev->empty()) {
      auto [d, n] = evaluate_loss(model, *dev, cfg.batch_size);
      log.dev_loss = d / static_cast<double>(n);
      double score = log.dev_loss;
      if (cfg.select_by_bleu) {
        log.dev_bleu = corpus_bleu_ids(model, *dev);
        score = -*log.dev_bleu;
      }
      if (std::isfinite(log.dev_loss) && score < best_score) {
        best_score = score;
        best.emplace(model.tm().params(), model.head());
        report.best_epoch = epoch;
      }
    }
    log.seconds = seconds_since(t0);
    report.epochs.push_back(log);
    if (on_epoch && !on_epoch(log)) {
      report.stopped_early = true;
      break;
    }
  }
  if (best) {
    model.tm().params() = std::move(best->first);
    model.head() = std::move(best->second);
  }
  for (auto* s : sets) s->set_requires_grad(false);
  return report;
}

// ---------------------------------------------------------------------------

TextPipeline TextPipeline::build(const ParallelCorpus& train, const TrainConfig& cfg) {
  if (train.size() == 0) throw DataError("empty training corpus");
  TextPipeline tp;
  if (cfg.bpe_ops > 0) {
    tp.source_bpe = BpeModel::learn(train.source, cfg.bpe_ops);
    tp.target_bpe = BpeModel::learn(train.target, cfg.bpe_ops);
  }
  Corpus src, tgt;
  for (const auto& s : train.source) src.push_back(tp.segment_source(s));
  for (const auto& s : train.target) tgt.push_back(tp.segment_target(s));
  tp.source_vocab = Vocabulary::build(src, cfg.vocab_size);
  tp.target_vocab = Vocabulary::build(tgt, cfg.vocab_size);
  return tp;
}

Sentence TextPipeline::segment_source(const Sentence& s) const { return source_bpe ? source_bpe->encode(s) : s; }
Sentence TextPipeline::segment_target(const Sentence& s) const { return target_bpe ? target_bpe->encode(s) : s; }
Sentence TextPipeline::join_target(const Sentence& pieces) const {
  return target_bpe ? BpeModel::decode(pieces) : pieces;
}

std::vector<int> encode_sentence(const Sentence& s, const std::optional<BpeModel>& bpe, const Vocabulary& vocab) {
  return vocab.encode(bpe ? bpe->encode(s) : s);
}

template <typename T>
std::vector<typename FusedModel<T>::Example> make_examples(const FusedModel<T>& model, const TextPipeline& text,
                                                           const ParallelCorpus& corpus) {
  std::vector<typename FusedModel<T>::Example> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.source[i].empty()) continue;
    out.push_back(model.make_example(encode_sentence(corpus.source[i], text.source_bpe, text.source_vocab),
                                     encode_sentence(corpus.target[i], text.target_bpe, text.target_vocab)));
  }
  return out;
}

template <typename T>
TwoStageResult<T> train_two_stage(const ParallelCorpus& train, const ParallelCorpus* dev, const Corpus* monolingual,
                                  Variant variant, const TrainConfig& cfg,
                                  std::shared_ptr<const LanguageModel<T>> pretrained_lm, const TwoStageHooks& hooks,
                                  std::optional<TextPipeline> text) {
  cfg.validate();
  TwoStageResult<T> res;
  res.text = text ? std::move(*text) : TextPipeline::build(train, cfg);

  if (uses_lm(variant)) {
    if (pretrained_lm) {
      res.lm = std::move(pretrained_lm);
    } else {
      if (!monolingual || monolingual->empty()) {
        throw ConfigError(std::string(variant_name(variant)) +
                          " fusion needs a monolingual corpus or a pre-trained language model");
      }
      LmConfig lc;
      lc.embed_size = cfg.embed_size;
      lc.hidden_size = cfg.hidden_size;
      lc.init_scale = cfg.init_scale;
      auto lm = std::make_shared<LanguageModel<T>>(res.text.target_vocab, lc, cfg.seed + 2);
      std::vector<std::vector<int>> mono_ids;
      for (const auto& s : *monolingual) {
        if (!s.empty()) mono_ids.push_back(encode_sentence(s, res.text.target_bpe, res.text.target_vocab));
      }
      std::vector<std::vector<int>> dev_ids;
      if (dev) {
        for (const auto& s : dev->target) dev_ids.push_back(encode_sentence(s, res.text.target_bpe, res.text.target_vocab));
      }
      res.lm_report = train_lm(*lm, mono_ids, dev ? &dev_ids : nullptr, cfg, cfg.pretrain_epochs, hooks.on_lm_epoch);
      res.lm = std::move(lm);
    }
    res.lm_checksum_before = res.lm->params().checksum();
  }

  TmConfig tc;
  tc.embed_size = cfg.embed_size;
  tc.hidden_size = cfg.hidden_size;
  tc.init_scale = cfg.init_scale;
  tc.output_layer = uses_tm_output(variant);
  TranslationModel<T> tm(res.text.source_vocab, res.text.target_vocab, tc, cfg.seed);
  res.model = std::make_unique<FusedModel<T>>(variant, std::move(tm), res.lm, cfg.seed + 1);

  const auto train_ex = make_examples(*res.model, res.text, train);
  std::vector<typename FusedModel<T>::Example> dev_ex;
  if (dev) dev_ex = make_examples(*res.model, res.text, *dev);
  res.tm_report = train_tm(*res.model, train_ex, dev ? &dev_ex : nullptr, cfg, hooks.on_tm_epoch);
  if (res.lm) res.lm_checksum_after = res.lm->params().checksum();
  return res;
}

template <typename T>
Corpus translate_corpus(const FusedModel<T>& model, const TextPipeline& text, const Corpus& sources,
                        std::size_t beam, std::size_t max_len) {
  Corpus out;
  out.reserve(sources.size());
  const auto& vocab = model.tm().target_vocab();
  for (const auto& src : sources) {
    if (src.empty()) {
      out.emplace_back();
      continue;
    }
    FusedStepModel<T> step(model, encode_sentence(src, text.source_bpe, text.source_vocab));
    auto hyp = beam == 1 ? greedy_decode(step, max_len) : beam_decode(step, SearchOptions{beam, max_len, false});
    out.push_back(text.join_target(vocab.decode(hyp.tokens)));
  }
  return out;
}

#define FUSEMT_INSTANTIATE_TRAINING(T)                                                                              \
  template void adagrad_update<T>(ParameterSet<T>&, AdagradState<T>&, double);                                      \
  template double clip_gradients<T>(const std::vector<ParameterSet<T>*>&, double);                                  \
  template TrainReport train_lm<T>(LanguageModel<T>&, const std::vector<std::vector<int>>&,                         \
                                   const std::vector<std::vector<int>>*, const TrainConfig&, std::size_t,           \
                                   const EpochCallback&);                                                           \
  template TrainReport train_tm<T>(FusedModel<T>&, const std::vector<typename FusedModel<T>::Example>&,             \
                                   const std::vector<typename FusedModel<T>::Example>*, const TrainConfig&,         \
                                   const EpochCallback&);                                                           \
  template std::pair<double, std::size_t> evaluate_loss<T>(                                                         \
      const FusedModel<T>&, const std::vector<typename FusedModel<T>::Example>&, std::size_t);                      \
  template std::vector<typename FusedModel<T>::Example> make_examples<T>(const FusedModel<T>&, const TextPipeline&, \
                                                                         const ParallelCorpus&);                    \
  template TwoStageResult<T> train_two_stage<T>(const ParallelCorpus&, const ParallelCorpus*, const Corpus*,        \
                                                Variant, const TrainConfig&,                                        \
                                                std::shared_ptr<const LanguageModel<T>>, const TwoStageHooks&,      \
                                                std::optional<TextPipeline>);                                       \
  template Corpus translate_corpus<T>(const FusedModel<T>&, const TextPipeline&, const Corpus&, std::size_t,        \
                                      std::size_t);

FUSEMT_INSTANTIATE_TRAINING(float)
FUSEMT_INSTANTIATE_TRAINING(double)

#undef FUSEMT_INSTANTIATE_TRAINING

}  // namespace fusemt
