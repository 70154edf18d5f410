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

#include <filesystem>
#include <fstream>

#include "fusemt/checkpoint.hpp"
#include "fusemt/decoding.hpp"
#include "fusemt/errors.hpp"
#include "toy.hpp"

namespace fusemt {
namespace {

namespace fs = std::filesystem;

Checkpoint sample() {
  Checkpoint ck;
  ck.variant = "dynamic";
  ck.config = {{"seed", "3"}, {"lr", "0.1"}};
  ck.tensors.emplace_back("a", Tensor<float>::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  ck.tensors.emplace_back("b", Tensor<float>::vector({-0.5f}));
  ck.sections = {{"vocab.src", "x\t4\t1\n"}};
  return ck;
}

TEST(Checkpoint, SerializeRoundTrip) {
  const Checkpoint ck = sample();
  const std::string bytes = serialize_checkpoint(ck);
  EXPECT_EQ(bytes.substr(0, kCheckpointMagic.size()), kCheckpointMagic);
  const Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_EQ(back.variant, ck.variant);
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.sections, ck.sections);
  ASSERT_EQ(back.tensors.size(), 2u);
  EXPECT_EQ(back.tensor("a").shape(), (Shape{2, 3}));
  EXPECT_EQ(back.tensor("a").storage(), ck.tensors[0].second.storage());
  EXPECT_EQ(back.tensor("b")[0], -0.5f);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
}

TEST(Checkpoint, MalformedInputsAreDataErrors) {
  const std::string bytes = serialize_checkpoint(sample());
  EXPECT_THROW(deserialize_checkpoint("NOTMAGIC"), DataError);
  for (std::size_t cut : {std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize_checkpoint(std::string_view(bytes).substr(0, cut)), DataError) << cut;
  }
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), DataError);
  Checkpoint bad = sample();
  bad.variant = "deep";
  EXPECT_THROW(serialize_checkpoint(bad), ContractError);
  std::string renamed = bytes;
  renamed.replace(renamed.find("dynamic"), 7, "dynamix");
  EXPECT_THROW(deserialize_checkpoint(renamed), DataError);
  EXPECT_THROW(sample().tensor("missing"), DataError);
  EXPECT_THROW(sample().setting("missing"), DataError);
}

TEST(Checkpoint, FailedSaveLeavesNoFile) {
  const fs::path dir = fs::temp_directory_path() / "fusemt_ck_missing_dir" / "nested";
  EXPECT_THROW(save_checkpoint(dir / "x.ckpt", sample()), Error);
  EXPECT_FALSE(fs::exists(dir / "x.ckpt"));
  EXPECT_THROW(load_checkpoint(dir / "x.ckpt"), DataError);
}

TEST(Checkpoint, FileRoundTrip) {
  const fs::path p = fs::temp_directory_path() / "fusemt_ck_roundtrip.ckpt";
  save_checkpoint(p, sample());
  EXPECT_EQ(serialize_checkpoint(load_checkpoint(p)), serialize_checkpoint(sample()));
  fs::remove(p);
}

TEST(Checkpoint, LanguageModelRoundTrip) {
  const Vocabulary v = test::toy_vocab(9, "t");
  LmConfig c;
  c.embed_size = c.hidden_size = 5;
  LanguageModel<float> lm(v, c, 4);
  Rng rng(4);
  test::randomize(lm.params(), rng, 0.5);
  const auto bundle = lm_from_checkpoint(deserialize_checkpoint(serialize_checkpoint(lm_checkpoint(lm, {}))));
  EXPECT_EQ(bundle.lm->params().checksum(), lm.params().checksum());
  EXPECT_EQ(bundle.lm->vocab(), v);
  EXPECT_FALSE(bundle.bpe.has_value());
}

TEST(Checkpoint, EveryVariantRoundTripsWithIdenticalScores) {
  for (Variant var : {Variant::Baseline, Variant::Cold, Variant::PostNorm, Variant::PreNorm, Variant::Dynamic}) {
    const Vocabulary tgt = test::toy_vocab(9, "t");
    auto toy = test::toy_models<float>(var, 4, test::toy_vocab(9, "s"), tgt, tgt, 6);
    TextPipeline text{std::nullopt, std::nullopt, toy.model->tm().source_vocab(), tgt};
    const auto ck = model_checkpoint(*toy.model, text, {{"run.seed", "6"}});
    EXPECT_EQ(ck.variant, variant_name(var));
    EXPECT_EQ(ck.setting("run.seed"), "6");
    const auto back = model_from_checkpoint(deserialize_checkpoint(serialize_checkpoint(ck)));
    EXPECT_EQ(back.model->variant(), var);
    EXPECT_EQ(back.model->tm().params().checksum(), toy.model->tm().params().checksum());
    EXPECT_EQ(back.model->head().checksum(), toy.model->head().checksum());
    if (uses_lm(var)) {
      EXPECT_EQ(back.model->lm()->params().checksum(), toy.lm->params().checksum());
    }
    const std::vector<int> src = {4, 6, 5};
    FusedStepModel<float> a(*toy.model, src), b(*back.model, src);
    const auto sa = a.start(), sb = b.start();
    EXPECT_EQ(sa.log_probs, sb.log_probs) << variant_name(var);
  }
}

}  // namespace
}  // namespace fusemt
