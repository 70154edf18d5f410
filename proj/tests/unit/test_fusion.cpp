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
#include "fusemt/fusion.hpp"
#include "fusemt/grad_check.hpp"
#include "toy.hpp"

namespace fusemt {
namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Shallow

TEST(Shallow, ZeroLambdaReturnsTranslationScores) {
  const std::vector<double> tm = {std::log(0.2), std::log(0.5), std::log(0.3)};
  const std::vector<double> lm = {std::log(0.9), std::log(0.05), std::log(0.05)};
  EXPECT_EQ(shallow_combine(tm, lm, ShallowConfig{0.0}), tm);
}

TEST(Shallow, UniformLmKeepsArgmax) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto tm = log_softmax<double>(test::random_vector(rng, 9, -3, 3));
    const std::vector<double> lm(9, std::log(1.0 / 9.0));
    EXPECT_EQ(argmax(shallow_combine(tm, lm, ShallowConfig{0.7})), argmax(tm));
  }
}

TEST(Shallow, HandProductFlipsArgmax) {
  const std::vector<double> tm = {std::log(0.6), std::log(0.4)};
  const std::vector<double> lm = {std::log(0.1), std::log(0.9)};
  const auto s = shallow_combine(tm, lm, ShallowConfig{1.0});
  EXPECT_EQ(argmax(s), 1u);
  EXPECT_NEAR(s[0], std::log(0.06), 1e-12);
  EXPECT_NEAR(s[1], std::log(0.36), 1e-12);
}

TEST(Shallow, LengthMismatchIsVocabularyError) {
  EXPECT_THROW(shallow_combine(std::vector<double>{0, 0}, std::vector<double>{0, 0, 0}, {}), VocabularyMismatch);
  EXPECT_THROW(shallow_combine(std::vector<double>{0}, std::vector<double>{0}, ShallowConfig{-1}), ContractError);
}

// ---------------------------------------------------------------------------
// Cold

ColdFusionParams<double> cold_params(std::size_t h, std::size_t v_lm, std::size_t v_tm, double fill) {
  return {Tensor<double>(Shape{h, v_lm}, fill), Tensor<double>(Shape{2 * h, h}, fill),
          Tensor<double>(Shape{2 * h, v_tm}, fill)};
}

TEST(Cold, AllOnesToyMatchesHandEvaluation) {
  const auto p = cold_params(2, 2, 3, 1.0);
  const std::vector<double> s_tm = {1.0, 2.0}, s_lm = {0.5, -1.5};
  const auto tr = cold_fuse<double>(s_tm, s_lm, p);
  // h_LM = [-1, -1]; W_gate input sums to 1; g = sigmoid(1).
  const double g = sigmoid(1.0);
  EXPECT_EQ(tr.h_lm, (std::vector<double>{-1.0, -1.0}));
  for (double x : tr.g) EXPECT_NEAR(x, g, 1e-12);
  EXPECT_NEAR(tr.h_prime[2], -g, 1e-12);
  for (double x : tr.s_cold) EXPECT_NEAR(x, 3.0 - 2.0 * g, 1e-12);
  EXPECT_NEAR(tr.s_cold[0], 1.5378828427399902, 1e-6);
}

TEST(Cold, OrientationMatchesPrintedShapes) {
  // W_LM is |h| x |V_LM|: h_LM[i] = sum_j W_LM[i][j] S_LM[j].
  ColdFusionParams<double> p = cold_params(2, 2, 2, 0.0);
  p.W_LM = Tensor<double>::matrix(2, 2, {1, 2, 0, 1});
  p.W_gate = Tensor<double>::matrix(4, 2, {1, 0, 0, 0, 0, 0, 0, 1});
  p.W_output = Tensor<double>::matrix(4, 2, {1, 0, 0, 0, 0, 0, 0, 1});
  const auto tr = cold_fuse<double>(std::vector<double>{0.3, 0.0}, std::vector<double>{0.5, -1.5}, p);
  EXPECT_NEAR(tr.h_lm[0], -2.5, 1e-12);
  EXPECT_NEAR(tr.h_lm[1], -1.5, 1e-12);
  // gate column 0 reads S_TM[0]; column 1 reads h_LM[1].
  EXPECT_NEAR(tr.g[0], sigmoid(0.3), 1e-12);
  EXPECT_NEAR(tr.g[1], sigmoid(-1.5), 1e-12);
  EXPECT_NEAR(tr.s_cold[0], 0.3, 1e-12);
  EXPECT_NEAR(tr.s_cold[1], sigmoid(-1.5) * -1.5, 1e-12);
}

TEST(Cold, ZeroGateWeightsHalveTheLmState) {
  Rng rng(2);
  auto p = cold_params(3, 4, 5, 0.0);
  fill_uniform(p.W_LM, rng, 1.0);
  fill_uniform(p.W_output, rng, 1.0);
  const auto s_tm = test::random_vector(rng, 3, -1, 1), s_lm = test::random_vector(rng, 4, -1, 1);
  const auto tr = cold_fuse<double>(s_tm, s_lm, p);
  for (double g : tr.g) EXPECT_DOUBLE_EQ(g, 0.5);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(tr.h_prime[i], s_tm[i]);
    EXPECT_DOUBLE_EQ(tr.h_prime[3 + i], 0.5 * tr.h_lm[i]);
  }
}

TEST(Cold, ZeroLmProjectionIgnoresTheLm) {
  Rng rng(3);
  auto p = cold_params(3, 4, 5, 0.0);
  fill_uniform(p.W_gate, rng, 1.0);
  fill_uniform(p.W_output, rng, 1.0);
  const auto s_tm = test::random_vector(rng, 3, -1, 1);
  const auto a = cold_fuse<double>(s_tm, test::random_vector(rng, 4, -5, 5), p);
  const auto b = cold_fuse<double>(s_tm, test::random_vector(rng, 4, -5, 5), p);
  for (double x : a.h_lm) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(a.s_cold, b.s_cold);
}

TEST(Cold, ShapesAreValidated) {
  auto p = cold_params(2, 3, 4, 0.1);
  EXPECT_THROW(cold_fuse<double>(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}, p), ShapeError);
  EXPECT_THROW(cold_fuse<double>(std::vector<double>{1, 2}, std::vector<double>{1, 2}, p), ShapeError);
}

// ---------------------------------------------------------------------------
// Simple fusion

TEST(PostNorm, HandEvaluation) {
  const auto out = postnorm_combine(std::vector<double>{std::log(0.6), std::log(0.4)}, std::vector<double>{0.25, 0.75});
  EXPECT_NEAR(out[0], 1.0 / (1.0 + std::exp(0.15)), 1e-12);
  EXPECT_NEAR(out[0], 0.4626, 1e-4);
  EXPECT_NEAR(out[1], 0.5374, 1e-4);
}

TEST(PostNorm, UniformLmKeepsBaselineArgmax) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto logits = test::random_vector(rng, 11, -4, 4);
    const std::vector<double> uniform(11, 1.0 / 11.0);
    EXPECT_EQ(argmax(postnorm_combine(logits, uniform)), argmax(logits));
  }
}

TEST(PostNorm, OneHotLmSelectsItsToken) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto logits = test::random_vector(rng, 6, -4, 4);
    std::vector<double> p(6, 0.0);
    const std::size_t k = uniform_index(rng, 6);
    p[k] = 1.0;
    EXPECT_EQ(argmax(postnorm_combine(logits, p)), k);
  }
}

TEST(PreNorm, HandEvaluation) {
  const auto out = prenorm_combine(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5});
  EXPECT_NEAR(out[0], 0.7311, 1e-4);
  EXPECT_NEAR(out[1], 0.2689, 1e-4);
  EXPECT_NEAR(out[0], sigmoid(1.0), 1e-12);
}

TEST(PreNorm, ZeroLogitsReturnLmDistribution) {
  Rng rng(6);
  const auto p = test::random_distribution(rng, 7);
  const auto out = prenorm_combine(std::vector<double>(7, 0.0), p);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(out[i], p[i], 1e-7);
}

TEST(PreNorm, UniformLmReturnsBaselineSoftmax) {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto logits = test::random_vector(rng, 8, -5, 5);
    const auto out = prenorm_combine(logits, std::vector<double>(8, 0.125));
    const auto base = log_softmax<double>(logits);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(out[k], std::exp(base[k]), 1e-7);
  }
}

TEST(PreNorm, ZeroProbabilityIsFloored) {
  const auto out = prenorm_combine(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 0.0});
  EXPECT_TRUE(std::isfinite(out[1]));
  EXPECT_NEAR(out[1], kProbFloor, 1e-15);
}

TEST(SimpleFusion, MismatchedLengthsAreVocabularyErrors) {
  EXPECT_THROW(postnorm_combine(std::vector<double>{0, 0}, std::vector<double>{1}), VocabularyMismatch);
  EXPECT_THROW(prenorm_combine(std::vector<double>{0, 0}, std::vector<double>{1}), VocabularyMismatch);
}

// ---------------------------------------------------------------------------
// Dynamic

TEST(Dynamic, HandEvaluation) {
  DynamicFusionParams<double> p{Tensor<double>::matrix(2, 2, {1, 0, 0, 1}), Tensor<double>(Shape{4, 3}, 1.0)};
  const auto tr = dynamic_fuse<double>(std::vector<double>{0, 0}, std::vector<double>{0.8, 0.2}, p);
  EXPECT_NEAR(tr.alpha[0], 0.5, 1e-12);
  EXPECT_NEAR(tr.alpha[1], 0.5, 1e-12);
  EXPECT_NEAR(tr.c_lm[0], 0.4, 1e-12);
  EXPECT_NEAR(tr.c_lm[1], 0.1, 1e-12);
  EXPECT_NEAR(tr.c_word.at(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(tr.c_word.at(1, 1), 0.5, 1e-12);
  for (double s : tr.s_attn) EXPECT_NEAR(s, 0.5, 1e-12);
}

TEST(Dynamic, UniformLmScalesPlainContext) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const std::size_t h = 2 + uniform_index(rng, 4), v = 2 + uniform_index(rng, 7);
    DynamicFusionParams<double> p{Tensor<double>(Shape{v, h}), Tensor<double>(Shape{2 * h, 3})};
    fill_uniform(p.e_word, rng, 1.0);
    fill_uniform(p.W, rng, 1.0);
    const auto s_tm = test::random_vector(rng, h, -1, 1);
    const auto tr = dynamic_fuse<double>(s_tm, std::vector<double>(v, 1.0 / static_cast<double>(v)), p);
    for (std::size_t j = 0; j < h; ++j) {
      double ctx = 0.0;
      for (std::size_t w = 0; w < v; ++w) ctx += tr.alpha[w] * p.e_word.at(w, j);
      EXPECT_NEAR(tr.c_lm[j], ctx / static_cast<double>(v), 1e-12);
    }
  }
}

TEST(Dynamic, TraceInvariants) {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const std::size_t h = 1 + uniform_index(rng, 6), v_lm = 2 + uniform_index(rng, 10), v_tm = 2 + uniform_index(rng, 5);
    DynamicFusionParams<double> p{Tensor<double>(Shape{v_lm, h}), Tensor<double>(Shape{2 * h, v_tm})};
    fill_uniform(p.e_word, rng, 3.0);
    fill_uniform(p.W, rng, 1.0);
    const auto s_tm = test::random_vector(rng, h, -3, 3);
    const auto tr = dynamic_fuse<double>(s_tm, test::random_distribution(rng, v_lm), p);
    EXPECT_NEAR(std::accumulate(tr.alpha.begin(), tr.alpha.end(), 0.0), 1.0, 1e-6);
    for (std::size_t j = 0; j < h; ++j) EXPECT_EQ(tr.h_tm[j], s_tm[j]);
    for (std::size_t j = 0; j < h; ++j) EXPECT_EQ(tr.h_tm[h + j], tr.c_lm[j]);
    EXPECT_EQ(tr.s_attn.size(), v_tm);
  }
}

// ---------------------------------------------------------------------------
// Differentiable heads agree with the single-vector combiners.

TEST(HeadGraphs, AgreeWithCombiners) {
  Rng rng(10);
  const std::size_t h = 3, v = 5;
  ColdFusionParams<double> cp{Tensor<double>(Shape{h, v}), Tensor<double>(Shape{2 * h, h}), Tensor<double>(Shape{2 * h, v})};
  DynamicFusionParams<double> dp{Tensor<double>(Shape{v, h}), Tensor<double>(Shape{2 * h, v})};
  for (auto* t : {&cp.W_LM, &cp.W_gate, &cp.W_output, &dp.e_word, &dp.W}) fill_uniform(*t, rng, 1.0);
  const auto s_tm = test::random_vector(rng, h, -1, 1), s_lm = test::random_vector(rng, v, -2, 2);
  const auto logits = test::random_vector(rng, v, -2, 2);
  const auto p_lm = test::random_distribution(rng, v);

  Tape<double> tape;
  auto row = [&](const std::vector<double>& x) { return tape.input(Tensor<double>::matrix(1, x.size(), x)); };
  const auto cg = cold_graph(row(s_tm), row(s_lm), tape.constant(cp.W_LM), tape.constant(cp.W_gate),
                             tape.constant(cp.W_output));
  const auto ct = cold_fuse<double>(s_tm, s_lm, cp);
  for (std::size_t k = 0; k < v; ++k) EXPECT_NEAR(cg.s_cold.value()[k], ct.s_cold[k], 1e-12);

  const auto dg = dynamic_graph(row(s_tm), row(p_lm), tape.constant(dp.e_word), tape.constant(dp.W));
  const auto dt = dynamic_fuse<double>(s_tm, p_lm, dp);
  for (std::size_t k = 0; k < v; ++k) EXPECT_NEAR(dg.s_attn.value()[k], dt.s_attn[k], 1e-12);

  const auto post = ops::softmax(postnorm_graph(row(logits), row(p_lm))).value();
  const auto post_ref = postnorm_combine(logits, p_lm);
  const auto pre = ops::softmax(prenorm_graph(row(logits), row(p_lm))).value();
  const auto pre_ref = prenorm_combine(logits, p_lm);
  for (std::size_t k = 0; k < v; ++k) {
    EXPECT_NEAR(post[k], post_ref[k], 1e-12);
    EXPECT_NEAR(pre[k], pre_ref[k], 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Fused models

constexpr Variant kAll[] = {Variant::Baseline, Variant::Cold, Variant::PostNorm, Variant::PreNorm, Variant::Dynamic};

TEST(FusedModel, VariantNamesRoundTrip) {
  for (Variant v : kAll) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_THROW(parse_variant("deep"), ConfigError);
}

TEST(FusedModel, SimpleFusionRejectsMismatchedVocabularies) {
  const Vocabulary src = test::toy_vocab(8, "s"), tgt = test::toy_vocab(9, "t"), lm_v = test::toy_vocab(8, "t");
  for (Variant v : {Variant::PostNorm, Variant::PreNorm}) {
    EXPECT_THROW(test::toy_models<float>(v, 3, src, tgt, lm_v, 1), VocabularyMismatch) << variant_name(v);
  }
  for (Variant v : {Variant::Cold, Variant::Dynamic}) {
    EXPECT_NO_THROW(test::toy_models<float>(v, 3, src, tgt, lm_v, 1)) << variant_name(v);
  }
}

TEST(FusedModel, FusionWithoutLmIsConfigError) {
  TmConfig c;
  c.embed_size = c.hidden_size = 3;
  c.output_layer = false;
  TranslationModel<float> tm(test::toy_vocab(8, "s"), test::toy_vocab(8, "t"), c, 1);
  EXPECT_THROW(FusedModel<float>(Variant::Dynamic, tm, nullptr, 2), ConfigError);
}

TEST(FusedModel, HeadShapesMatchPrintedSizes) {
  const Vocabulary src = test::toy_vocab(8, "s"), tgt = test::toy_vocab(9, "t"), lm_v = test::toy_vocab(7, "u");
  auto cold = test::toy_models<double>(Variant::Cold, 3, src, tgt, lm_v, 2);
  const auto cp = cold.model->cold_params();
  EXPECT_EQ(cp.W_LM.shape(), (Shape{3, 7}));
  EXPECT_EQ(cp.W_gate.shape(), (Shape{6, 3}));
  EXPECT_EQ(cp.W_output.shape(), (Shape{6, 9}));
  auto dyn = test::toy_models<double>(Variant::Dynamic, 3, src, tgt, lm_v, 2);
  const auto dp = dyn.model->dynamic_params();
  EXPECT_EQ(dp.e_word.shape(), (Shape{7, 3}));
  EXPECT_EQ(dp.W.shape(), (Shape{6, 9}));
  EXPECT_FALSE(dyn.model->tm().params().contains("tm.out.W"));
}

template <typename T>
std::vector<typename FusedModel<T>::Example> toy_examples(const FusedModel<T>& m, Rng& rng, std::size_t n) {
  std::vector<typename FusedModel<T>::Example> out;
  const std::size_t vs = m.tm().source_vocab().size(), vt = m.tm().target_vocab().size();
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(m.make_example(test::random_ids(rng, 1 + uniform_index(rng, 3), vs),
                                 test::random_ids(rng, 1 + uniform_index(rng, 3), vt)));
  }
  return out;
}

TEST(FusedModel, LossIsNonNegativeAndLeavesLmUntouched) {
  Rng rng(11);
  for (Variant v : kAll) {
    auto toy = test::toy_models<double>(v, 3, test::toy_vocab(7, "s"), test::toy_vocab(7, "t"),
                                        test::toy_vocab(7, "t"), 3);
    auto& model = *toy.model;
    const auto ex = toy_examples(model, rng, 3);
    std::vector<const FusedModel<double>::Example*> batch;
    for (const auto& e : ex) batch.push_back(&e);
    for (auto* set : model.trainable()) set->set_requires_grad(true);
    Tape<double> tape;
    std::size_t tokens = 0;
    auto loss = model.loss(Binder<double>(tape, model.tm().params()), Binder<double>(tape, model.head()),
                           std::span<const FusedModel<double>::Example* const>(batch), &tokens);
    EXPECT_GE(loss.value().item(), 0.0);
    tape.backward(loss);
    for (const auto& [name, t] : toy.lm->params()) EXPECT_FALSE(t.has_grad()) << variant_name(v) << " " << name;
    bool any = false;
    for (const auto& [name, t] : model.tm().params()) any = any || t.has_grad();
    EXPECT_TRUE(any);
  }
}

TEST(FusedModel, GoldOutsideVocabularyRejected) {
  auto toy = test::toy_models<float>(Variant::Dynamic, 3, test::toy_vocab(7, "s"), test::toy_vocab(7, "t"),
                                     test::toy_vocab(7, "t"), 4);
  EXPECT_THROW(toy.model->make_example({4}, {7}), ContractError);
}

TEST(FusedModel, EveryHeadPassesGradCheck) {
  Rng rng(12);
  for (Variant v : kAll) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const Vocabulary tgt = test::toy_vocab(6, "t");
      const Vocabulary lm_v = requires_shared_vocab(v) ? tgt : test::toy_vocab(5, "t");
      auto toy = test::toy_models<double>(v, 2 + seed % 2, test::toy_vocab(6, "s"), tgt, lm_v, seed);
      auto& model = *toy.model;
      const auto ex = toy_examples(model, rng, 2);
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
      EXPECT_TRUE(rep.passed) << variant_name(v) << " seed " << seed << " rel " << rep.max_rel_error << " at "
                              << rep.worst;
    }
  }
}

// Step-wise decoding scores agree with the teacher-forced loss.
TEST(FusedModel, DecoderScoresMatchTrainingLoss) {
  Rng rng(13);
  for (Variant v : kAll) {
    const Vocabulary tgt = test::toy_vocab(8, "t");
    auto toy = test::toy_models<double>(v, 3, test::toy_vocab(8, "s"), tgt, tgt, 5);
    const auto& model = *toy.model;
    const auto ex = model.make_example({4, 5, 6}, {7, 4});
    Tape<double> tape;
    std::vector<const FusedModel<double>::Example*> batch = {&ex};
    const double loss = model
                            .loss(Binder<double>(tape, model.tm().params()), Binder<double>(tape, model.head()),
                                  std::span<const FusedModel<double>::Example* const>(batch), nullptr)
                            .value()
                            .item();
    FusedStepModel<double> step(model, ex.source);
    auto s = step.start();
    double nll = 0.0;
    for (int tok : {7, 4, Vocabulary::kEos}) {
      nll -= step.log_probs(s)[static_cast<std::size_t>(tok)];
      if (tok != Vocabulary::kEos) s = step.advance(s, tok);
    }
    EXPECT_NEAR(nll, loss, 1e-9) << variant_name(v);
  }
}

// ---------------------------------------------------------------------------
// LM bridge

TEST(LmBridge, SharedVocabularyStepsPerToken) {
  const Vocabulary v = test::toy_vocab(8, "t");
  auto toy = test::toy_models<double>(Variant::Dynamic, 3, test::toy_vocab(8, "s"), v, v, 6);
  LmBridge<double> bridge(toy.lm, v);
  EXPECT_TRUE(bridge.shared_vocab());
  auto s = bridge.start();
  auto direct = toy.lm->step(toy.lm->initial_state(), Vocabulary::kBos);
  EXPECT_EQ(s.logits, direct.logits);
  s = bridge.advance(s, 5);
  direct = toy.lm->step(direct.state, 5);
  EXPECT_EQ(s.logits, direct.logits);
  const auto after_eos = bridge.advance(s, Vocabulary::kEos);
  EXPECT_EQ(after_eos.logits, s.logits);
  double total = 0.0;
  for (double p : s.probs) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(LmBridge, SubwordPiecesAdvanceOncePerWord) {
  const Vocabulary lm_vocab = Vocabulary::build({{"kaki", "kaki", "soto"}}, 10);
  const Vocabulary tm_vocab = Vocabulary::build({{"ka@@", "ki", "so@@", "to", "kaki"}}, 12);
  LmConfig c;
  c.embed_size = c.hidden_size = 3;
  auto lm = std::make_shared<LanguageModel<double>>(lm_vocab, c, 7);
  Rng rng(7);
  test::randomize(lm->params(), rng, 0.5);
  LmBridge<double> bridge(lm, tm_vocab);
  EXPECT_FALSE(bridge.shared_vocab());
  auto s = bridge.start();
  const auto start_logits = s.logits;
  s = bridge.advance(s, tm_vocab.id("ka@@"));
  EXPECT_EQ(s.logits, start_logits);
  EXPECT_EQ(s.pending, "ka");
  s = bridge.advance(s, tm_vocab.id("ki"));
  auto direct = lm->step(lm->step(lm->initial_state(), Vocabulary::kBos).state, lm_vocab.id("kaki"));
  EXPECT_EQ(s.logits, direct.logits);
  EXPECT_TRUE(s.pending.empty());

  const std::vector<int> target = {tm_vocab.id("so@@"), tm_vocab.id("to"), tm_vocab.id("kaki")};
  const auto tr = bridge.track(target);
  EXPECT_EQ(tr.logits.shape(), (Shape{4, lm_vocab.size()}));
  for (std::size_t k = 0; k < lm_vocab.size(); ++k) {
    EXPECT_EQ(tr.logits.at(0, k), tr.logits.at(1, k));
    EXPECT_NE(tr.logits.at(1, k), tr.logits.at(2, k));
  }
}

}  // namespace
}  // namespace fusemt
