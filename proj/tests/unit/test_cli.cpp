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
#include <sstream>

#include "fusemt/checkpoint.hpp"
#include "fusemt/cli.hpp"
#include "fusemt/errors.hpp"

namespace fusemt::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "fusemt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fusemt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const std::string& name) const { return dir_ / name; }
  std::string p(const std::string& name) const { return path(name).string(); }

  // Small synthetic corpus plus a config for fast training runs.
  void synth() {
    ASSERT_EQ(run({"synth-data", "--out-dir", p("data"), "--train", "40", "--dev", "8", "--test", "8", "--mono",
                   "60", "--vocab", "10", "--seed", "3"})
                  .code,
              kExitOk);
    spit(path("run.cfg"), "# toy run\n"
                          "embed_size=8\nhidden_size=8\nvocab_size=40\nmax_epochs=2\npretrain_epochs=2\n"
                          "batch_size=8\n"
                          "train_source=" + p("data/train.src") + "\ntrain_target=" + p("data/train.tgt") +
                              "\ndev_source=" + p("data/dev.src") + "\ndev_target=" + p("data/dev.tgt") +
                              "\nmonolingual=" + p("data/mono.tgt") + "\n");
  }

  fs::path dir_;
};

TEST(RunConfig, ParseAndRoundTrip) {
  const auto c = RunConfig::parse("# comment\n\nlearning_rate=0.05\nbatch_size=4\nvariant=dynamic\n"
                                  "train_source=/tmp/x\nselect_by_bleu=true\n");
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.05);
  EXPECT_EQ(c.train.batch_size, 4u);
  EXPECT_EQ(c.variant, Variant::Dynamic);
  EXPECT_EQ(c.train_source, fs::path("/tmp/x"));
  EXPECT_TRUE(c.train.select_by_bleu);
  const auto back = RunConfig::parse(c.to_text());
  EXPECT_EQ(back.entries(), c.entries());
  EXPECT_EQ(c.entries().size(), run_config_keys().size());
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(RunConfig::parse("bogus=1\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("batch_size=many\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("variant=deep\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("no equals sign\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("select_by_bleu=maybe\n"), ConfigError);
}

TEST_F(CliTest, HelpAndParseErrors) {
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  EXPECT_EQ(run({"no-such-command"}).code, kExitConfig);
  EXPECT_EQ(run({"score", "--hyp", p("h")}).code, kExitConfig);
}

TEST_F(CliTest, ScoreIdenticalFiles) {
  spit(path("h.txt"), "a b c d\ne f g h\n");
  const auto r = run({"score", "--hyp", p("h.txt"), "--ref", p("h.txt")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, "BLEU\t100.00\nRIBES\t100.00\n");
  const auto with_rival = run({"score", "--hyp", p("h.txt"), "--ref", p("h.txt"), "--rival", p("h.txt"),
                               "--samples", "50"});
  EXPECT_EQ(with_rival.out, "BLEU\t100.00\nRIBES\t100.00\nP-VALUE\t1.0000\n");
}

TEST_F(CliTest, ScoreDataErrors) {
  spit(path("h.txt"), "a b\n");
  spit(path("r.txt"), "a b\nc d\n");
  EXPECT_EQ(run({"score", "--hyp", p("h.txt"), "--ref", p("r.txt")}).code, kExitData);
  EXPECT_EQ(run({"score", "--hyp", p("missing.txt"), "--ref", p("r.txt")}).code, kExitData);
}

TEST_F(CliTest, SynthDataIsDeterministic) {
  ASSERT_EQ(run({"synth-data", "--out-dir", p("a"), "--train", "20", "--mono", "30", "--seed", "5"}).code, kExitOk);
  ASSERT_EQ(run({"synth-data", "--out-dir", p("b"), "--train", "20", "--mono", "30", "--seed", "5"}).code, kExitOk);
  for (const char* f : {"train.src", "train.tgt", "dev.src", "test.tgt", "mono.tgt"}) {
    EXPECT_EQ(slurp(path("a") / f), slurp(path("b") / f)) << f;
  }
  EXPECT_NE(slurp(path("a") / "mono.tgt"), slurp(path("a") / "train.tgt"));
}

TEST_F(CliTest, LearnBpeAndBuildVocab) {
  spit(path("c.txt"), "abab abc\nab\n");
  ASSERT_EQ(run({"learn-bpe", "--input", p("c.txt"), "--output", p("m.bpe"), "--ops", "2"}).code, kExitOk);
  EXPECT_EQ(slurp(path("m.bpe")).substr(0, 4), "a b\n");
  ASSERT_EQ(run({"build-vocab", "--input", p("c.txt"), "--output", p("v.txt"), "--size", "20", "--bpe", p("m.bpe")})
                .code,
            kExitOk);
  EXPECT_NE(slurp(path("v.txt")).find("ab"), std::string::npos);
}

TEST_F(CliTest, TrainTranslateEndToEnd) {
  synth();
  auto r = run({"train-lm", "--config", p("run.cfg"), "--out", p("lm.ckpt"), "--log", p("lm.log")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string lm_log = slurp(path("lm.log"));
  EXPECT_EQ(std::count(lm_log.begin(), lm_log.end(), '\n'), 2);

  r = run({"train-tm", "--config", p("run.cfg"), "--set", "variant=dynamic", "--lm", p("lm.ckpt"), "--out",
           p("dyn.ckpt"), "--log", p("tm.log")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(load_checkpoint(path("dyn.ckpt")).variant, "dynamic");

  r = run({"translate", "--model", p("dyn.ckpt"), "--input", p("data/test.src"), "--output", p("out.txt"),
           "--dump-attention", p("att.txt")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string out = slurp(path("out.txt"));
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 8);

  r = run({"score", "--hyp", p("out.txt"), "--ref", p("data/test.tgt")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.substr(0, 5), "BLEU\t");
}

TEST_F(CliTest, BaselineAndShallowDecoding) {
  synth();
  // Shallow decoding needs one vocabulary shared by the TM target side and the LM.
  ASSERT_EQ(run({"build-vocab", "--input", p("data/train.tgt"), "--output", p("tgt.vocab"), "--size", "40"}).code,
            kExitOk);
  ASSERT_EQ(run({"build-vocab", "--input", p("data/train.src"), "--output", p("src.vocab"), "--size", "40"}).code,
            kExitOk);
  const std::string lm_shared = "lm_vocab=" + p("tgt.vocab");
  ASSERT_EQ(run({"train-lm", "--config", p("run.cfg"), "--set", lm_shared, "--out", p("lm.ckpt")}).code, kExitOk);
  auto r = run({"train-tm", "--config", p("run.cfg"), "--set", "source_vocab=" + p("src.vocab"), "--set",
                "target_vocab=" + p("tgt.vocab"), "--lm", p("lm.ckpt"), "--out", p("base.ckpt")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);

  r = run({"translate", "--model", p("base.ckpt"), "--input", p("data/test.src"), "--output", p("s0.txt"),
           "--shallow", "--lm", p("lm.ckpt"), "--lambda", "0"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  r = run({"translate", "--model", p("base.ckpt"), "--input", p("data/test.src"), "--output", p("plain.txt")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(slurp(path("s0.txt")), slurp(path("plain.txt")));

  EXPECT_EQ(run({"translate", "--model", p("base.ckpt"), "--input", p("data/test.src"), "--output", p("o.txt"),
                 "--lambda", "0.3"})
                .code,
            kExitConfig);
  EXPECT_EQ(run({"translate", "--model", p("base.ckpt"), "--input", p("data/test.src"), "--output", p("o.txt"),
                 "--dump-attention", p("a.txt")})
                .code,
            kExitConfig);
}

TEST_F(CliTest, ConfigAndDataErrorsWriteNothing) {
  synth();
  EXPECT_EQ(run({"train-tm", "--config", p("run.cfg"), "--set", "bogus=1", "--out", p("x.ckpt")}).code, kExitConfig);
  EXPECT_EQ(run({"train-tm", "--config", p("run.cfg"), "--set", "variant=cold", "--out", p("x.ckpt")}).code,
            kExitConfig);
  EXPECT_EQ(run({"train-tm", "--config", p("run.cfg"), "--set", "train_source=" + p("nope"), "--out", p("x.ckpt")})
                .code,
            kExitData);
  EXPECT_EQ(run({"train-tm", "--config", p("missing.cfg"), "--out", p("x.ckpt")}).code, kExitConfig);
  EXPECT_FALSE(fs::exists(path("x.ckpt")));
}

}  // namespace
}  // namespace fusemt::cli
