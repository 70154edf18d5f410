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

// Microbenchmarks for the hot paths: tape matmul, training step, decoding,
// metrics and subword encoding.

#include <benchmark/benchmark.h>

#include <memory>

#include "fusemt/bpe.hpp"
#include "fusemt/decoding.hpp"
#include "fusemt/evaluation.hpp"
#include "fusemt/fusion.hpp"
#include "fusemt/synthetic.hpp"
#include "fusemt/training.hpp"

namespace fusemt {
namespace {

// Shared fixture: a small synthetic task and an untrained model of each kind.
struct Setup {
  ParallelCorpus data = generate_synthetic(9, 64, 40);
  TrainConfig cfg = TrainConfig::desk();
  TextPipeline text = TextPipeline::build(data, cfg);
  std::shared_ptr<LanguageModel<float>> lm;

  Setup() {
    LmConfig lc;
    lc.embed_size = cfg.embed_size;
    lc.hidden_size = cfg.hidden_size;
    lm = std::make_shared<LanguageModel<float>>(text.target_vocab, lc, 3);
  }

  std::unique_ptr<FusedModel<float>> model(Variant v) const {
    TmConfig tc;
    tc.embed_size = cfg.embed_size;
    tc.hidden_size = cfg.hidden_size;
    tc.output_layer = uses_tm_output(v);
    return std::make_unique<FusedModel<float>>(
        v, TranslationModel<float>(text.source_vocab, text.target_vocab, tc, 1), uses_lm(v) ? lm : nullptr, 2);
  }
};

const Setup& setup() {
  static const Setup s;
  return s;
}

void BM_TapeMatmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor<float> a(Shape{n, n}), b(Shape{n, n});
  fill_uniform(a, rng, 1.0);
  fill_uniform(b, rng, 1.0);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  for (auto _ : state) {
    Tape<float> tape;
    auto loss = ops::sum(ops::matmul(tape.parameter(a), tape.parameter(b)));
    tape.backward(loss);
    benchmark::DoNotOptimize(a.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_TapeMatmul)->Arg(16)->Arg(64)->Arg(128);

void BM_TrainStep(benchmark::State& state) {
  const auto v = static_cast<Variant>(state.range(0));
  auto m = setup().model(v);
  const auto examples = make_examples(*m, setup().text, setup().data);
  std::vector<const FusedModel<float>::Example*> batch;
  for (std::size_t i = 0; i < 16; ++i) batch.push_back(&examples[i]);
  for (auto* set : m->trainable()) set->set_requires_grad(true);
  std::size_t tokens = 0;
  for (auto _ : state) {
    Tape<float> tape;
    auto loss = m->loss(Binder<float>(tape, m->tm().params()), Binder<float>(tape, m->head()),
                        std::span<const FusedModel<float>::Example* const>(batch), &tokens);
    tape.backward(loss);
  }
  state.SetLabel(std::string(variant_name(v)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(tokens));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(Variant::Baseline))
    ->Arg(static_cast<int>(Variant::Cold))
    ->Arg(static_cast<int>(Variant::PostNorm))
    ->Arg(static_cast<int>(Variant::PreNorm))
    ->Arg(static_cast<int>(Variant::Dynamic))
    ->Unit(benchmark::kMillisecond);

void BM_Decode(benchmark::State& state) {
  const auto beam = static_cast<std::size_t>(state.range(0));
  auto m = setup().model(Variant::Dynamic);
  const auto src = encode_sentence(setup().data.source[0], std::nullopt, setup().text.source_vocab);
  for (auto _ : state) {
    FusedStepModel<float> step(*m, src);
    benchmark::DoNotOptimize(beam_decode(step, SearchOptions{beam, 30, false}));
  }
}
BENCHMARK(BM_Decode)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_CorpusBleu(benchmark::State& state) {
  const auto& d = setup().data;
  for (auto _ : state) benchmark::DoNotOptimize(bleu(d.target, d.target));
}
BENCHMARK(BM_CorpusBleu);

void BM_CorpusRibes(benchmark::State& state) {
  const auto& d = setup().data;
  for (auto _ : state) benchmark::DoNotOptimize(corpus_ribes(d.target, d.target));
}
BENCHMARK(BM_CorpusRibes);

void BM_BpeEncode(benchmark::State& state) {
  const auto& d = setup().data;
  const BpeModel bpe = BpeModel::learn(d.target, 200);
  for (auto _ : state) {
    for (const auto& s : d.target) benchmark::DoNotOptimize(bpe.encode(s));
  }
}
BENCHMARK(BM_BpeEncode);

}  // namespace
}  // namespace fusemt

BENCHMARK_MAIN();
