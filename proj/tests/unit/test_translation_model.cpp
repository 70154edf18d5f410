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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fusemt/decoding.hpp"
#include "fusemt/errors.hpp"
#include "fusemt/grad_check.hpp"
#include "fusemt/training.hpp"
#include "fusemt/translation_model.hpp"
#include "toy.hpp"

namespace fusemt {
namespace {

template <typename T>
TranslationModel<T> random_tm(std::size_t h, std::size_t vs, std::size_t vt, std::uint64_t seed, double scale = 0.5,
                              bool output_layer = true) {
  TmConfig c;
  c.embed_size = h;
  c.hidden_size = h;
  c.output_layer = output_layer;
  TranslationModel<T> tm(test::toy_vocab(vs, "s"), test::toy_vocab(vt, "t"), c, seed);
  Rng rng(seed * 7 + 1);
  test::randomize(tm.params(), rng, scale);
  return tm;
}

TEST(TranslationModel, OneStatePerSourceToken) {
  auto tm = random_tm<float>(4, 9, 9, 1);
  EXPECT_EQ(tm.encode(std::vector<int>{5}).states.shape(), (Shape{1, 1, 4}));
  EXPECT_EQ(tm.encode(std::vector<int>{5, 6, 7}).states.shape(), (Shape{1, 3, 4}));
}

TEST(TranslationModel, EncodingIsDeterministic) {
  auto tm = random_tm<float>(4, 9, 9, 2);
  const std::vector<int> src = {4, 8, 6};
  EXPECT_EQ(tm.encode(src).states.storage(), tm.encode(src).states.storage());
}

TEST(TranslationModel, EncodingIsPositionSensitive) {
  Rng rng(3);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto tm = random_tm<double>(4, 12, 9, seed);
    auto src = test::random_ids(rng, 4, 12);
    auto perm = src;
    std::rotate(perm.begin(), perm.begin() + 1, perm.end());
    if (perm == src) continue;
    const auto a = tm.encode(src).states.storage(), b = tm.encode(perm).states.storage();
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
    EXPECT_GT(diff, 1e-6) << "seed " << seed;
  }
}

TEST(TranslationModel, AttentionIsADistribution) {
  Rng rng(4);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto tm = random_tm<float>(5, 11, 10, seed, 1.0);
    const auto src = test::random_ids(rng, 1 + uniform_index(rng, 8), 11);
    const auto enc = tm.encode(src);
    std::vector<float> state(enc.init.storage());
    int prev = Vocabulary::kBos;
    for (int t = 0; t < 4; ++t) {
      auto step = tm.decode_step(prev, state, enc);
      ASSERT_EQ(step.attention.size(), src.size());
      const double s = std::accumulate(step.attention.begin(), step.attention.end(), 0.0);
      EXPECT_NEAR(s, 1.0, 1e-6);
      state = step.state;
      prev = 4 + t;
    }
  }
}

TEST(TranslationModel, ZeroWeightsGiveUniformAttentionAndZeroLogits) {
  auto tm = random_tm<double>(4, 9, 9, 5);
  for (auto& [name, t] : tm.params()) t.fill(0.0);
  const auto enc = tm.encode(std::vector<int>{4, 5, 6, 7});
  const auto step = tm.decode_step(Vocabulary::kBos, enc.init.storage(), enc);
  for (double a : step.attention) EXPECT_DOUBLE_EQ(a, 0.25);
  for (double l : step.logits) EXPECT_DOUBLE_EQ(l, 0.0);
}

TEST(TranslationModel, LogitsMatchHandMultiplication) {
  // h = 3, V_TM = 5.
  auto tm = random_tm<double>(3, 6, 5, 6);
  const auto& W = tm.params().get("tm.out.W");
  const auto& b = tm.params().get("tm.out.b");
  ASSERT_EQ(W.shape(), (Shape{3, 5}));
  const std::vector<double> s = {0.5, -1.0, 2.0};
  const auto logits = tm.tm_logits(s);
  for (std::size_t v = 0; v < 5; ++v) {
    const double expect = s[0] * W.at(0, v) + s[1] * W.at(1, v) + s[2] * W.at(2, v) + b[v];
    EXPECT_NEAR(logits[v], expect, 1e-12);
  }
}

TEST(TranslationModel, ZeroStateAndBiasGiveUniformDistribution) {
  auto tm = random_tm<double>(3, 6, 7, 7);
  tm.params().get("tm.out.b").fill(0.0);
  const auto lp = log_softmax<double>(tm.tm_logits(std::vector<double>{0, 0, 0}));
  for (double x : lp) EXPECT_NEAR(std::exp(x), 1.0 / 7.0, 1e-12);
}

TEST(TranslationModel, SoftmaxShiftInvariance) {
  auto tm = random_tm<double>(3, 6, 7, 8);
  auto logits = tm.tm_logits(std::vector<double>{0.3, -0.2, 0.9});
  const auto a = log_softmax<double>(logits);
  for (auto& x : logits) x += 17.25;
  const auto b = log_softmax<double>(logits);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(std::exp(a[i]), std::exp(b[i]), 1e-7);
}

TEST(TranslationModel, RejectsInvalidIds) {
  auto tm = random_tm<float>(4, 9, 9, 9);
  EXPECT_THROW(tm.encode(std::vector<int>{}), ContractError);
  EXPECT_THROW(tm.encode(std::vector<int>{9}), ContractError);
  const auto enc = tm.encode(std::vector<int>{4});
  EXPECT_THROW(tm.decode_step(42, enc.init.storage(), enc), ContractError);
}

TEST(TranslationModel, NoOutputLayerMeansNoLogits) {
  auto tm = random_tm<float>(4, 9, 9, 10, 0.5, false);
  EXPECT_FALSE(tm.params().contains("tm.out.W"));
  const auto enc = tm.encode(std::vector<int>{4});
  EXPECT_TRUE(tm.decode_step(Vocabulary::kBos, enc.init.storage(), enc).logits.empty());
}

// Padding must not leak: a batch loss equals the sum of per-sentence losses.
TEST(TranslationModel, PaddedBatchMatchesSingles) {
  auto toy = test::toy_models<double>(Variant::Baseline, 4, test::toy_vocab(10, "s"), test::toy_vocab(9, "t"),
                                      test::toy_vocab(9, "t"), 11);
  const auto& model = *toy.model;
  std::vector<FusedModel<double>::Example> ex = {model.make_example({4, 5}, {6}),
                                                 model.make_example({7, 8, 9, 4, 5}, {4, 5, 6, 7})};
  auto loss_of = [&](std::vector<const FusedModel<double>::Example*> batch) {
    Tape<double> tape;
    return model
        .loss(Binder<double>(tape, model.tm().params()), Binder<double>(tape, model.head()),
              std::span<const FusedModel<double>::Example* const>(batch), nullptr)
        .value()
        .item();
  };
  EXPECT_NEAR(loss_of({&ex[0], &ex[1]}), loss_of({&ex[0]}) + loss_of({&ex[1]}), 1e-10);
}

TEST(TranslationModel, EndToEndGradientPassesCheck) {
  auto toy = test::toy_models<double>(Variant::Baseline, 3, test::toy_vocab(7, "s"), test::toy_vocab(7, "t"),
                                      test::toy_vocab(7, "t"), 12);
  auto& model = *toy.model;
  std::vector<FusedModel<double>::Example> ex = {model.make_example({4, 5}, {6, 4}),
                                                 model.make_example({6, 5, 4}, {5})};
  std::vector<Tensor<double>*> ps;
  for (auto* set : model.trainable()) {
    set->set_requires_grad(true);
    for (auto& [name, t] : *set) ps.push_back(&t);
  }
  auto loss = [&](Tape<double>& tape) {
    std::vector<const FusedModel<double>::Example*> batch = {&ex[0], &ex[1]};
    return model.loss(Binder<double>(tape, model.tm().params()), Binder<double>(tape, model.head()),
                      std::span<const FusedModel<double>::Example* const>(batch), nullptr);
  };
  GradCheckOptions opt;
  opt.tolerance = 1e-4;
  const auto rep = grad_check<double>(loss, ps, opt);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error << " at " << rep.worst;
}

TEST(TranslationModel, SinglePairLossDecreasesMonotonically) {
  const Vocabulary src = test::toy_vocab(10, "s"), tgt = test::toy_vocab(10, "t");
  TmConfig c;
  c.embed_size = 16;
  c.hidden_size = 16;
  FusedModel<float> model(Variant::Baseline, TranslationModel<float>(src, tgt, c, 13), nullptr, 14);
  const std::vector<FusedModel<float>::Example> ex = {model.make_example({4, 5, 6}, {7, 8, 4})};
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.learning_rate = 0.01;
  std::vector<double> losses;
  train_tm(model, ex, nullptr, cfg, [&](const EpochLog& log) {
    losses.push_back(log.train_loss);
    return true;
  });
  ASSERT_EQ(losses.size(), 60u);
  for (std::size_t e = 1; e < losses.size(); ++e) EXPECT_LE(losses[e], losses[e - 1] + 1e-3) << "epoch " << e + 1;
  EXPECT_LT(losses.back(), losses.front() - 0.5);
}

TEST(TranslationModel, GreedyDecodingIsDeterministic) {
  auto toy = test::toy_models<float>(Variant::Baseline, 6, test::toy_vocab(12, "s"), test::toy_vocab(12, "t"),
                                     test::toy_vocab(12, "t"), 15);
  const std::vector<int> src = {4, 9, 7, 11};
  FusedStepModel<float> a(*toy.model, src), b(*toy.model, src);
  EXPECT_EQ(greedy_decode(a, 20).tokens, greedy_decode(b, 20).tokens);
}

}  // namespace
}  // namespace fusemt
