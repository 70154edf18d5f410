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

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "fusemt/bpe.hpp"
#include "fusemt/corpus.hpp"
#include "fusemt/errors.hpp"
#include "fusemt/params.hpp"
#include "fusemt/synthetic.hpp"
#include "fusemt/vocabulary.hpp"

namespace fusemt {
namespace {

Corpus random_words_corpus(Rng& rng, std::size_t sentences, const std::string& alphabet) {
  Corpus c;
  for (std::size_t s = 0; s < sentences; ++s) {
    Sentence sent;
    const std::size_t n = 1 + uniform_index(rng, 6);
    for (std::size_t w = 0; w < n; ++w) {
      std::string word;
      const std::size_t len = 1 + uniform_index(rng, 6);
      for (std::size_t k = 0; k < len; ++k) word += alphabet[uniform_index(rng, alphabet.size())];
      sent.push_back(word);
    }
    c.push_back(sent);
  }
  return c;
}

// Independent merge learner: each token occurrence is a symbol list,
// pair counts are recomputed from scratch, ties go to the smallest pair.
std::vector<BpeModel::Merge> reference_bpe(const Corpus& corpus, std::size_t n_ops) {
  std::vector<std::vector<std::string>> tokens;
  for (const auto& s : corpus) {
    for (const auto& w : s) {
      std::vector<std::string> sym;
      for (char ch : w) sym.emplace_back(1, ch);
      tokens.push_back(sym);
    }
  }
  std::vector<BpeModel::Merge> merges;
  for (std::size_t op = 0; op < n_ops; ++op) {
    std::vector<std::pair<BpeModel::Merge, std::size_t>> counts;
    for (const auto& t : tokens) {
      for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        BpeModel::Merge p{t[i], t[i + 1]};
        auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& e) { return e.first == p; });
        if (it == counts.end()) {
          counts.emplace_back(p, 1);
        } else {
          ++it->second;
        }
      }
    }
    if (counts.empty()) break;
    auto best = counts.front();
    for (const auto& e : counts) {
      if (e.second > best.second || (e.second == best.second && e.first < best.first)) best = e;
    }
    merges.push_back(best.first);
    for (auto& t : tokens) {
      std::vector<std::string> out;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (i + 1 < t.size() && t[i] == best.first.first && t[i + 1] == best.first.second) {
          out.push_back(t[i] + t[i + 1]);
          ++i;
        } else {
          out.push_back(t[i]);
        }
      }
      t = out;
    }
  }
  return merges;
}

TEST(Vocabulary, FrequencyRankedWithReservedIds) {
  const Vocabulary v = Vocabulary::build({{"a", "a", "b"}}, 6);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<unk>", "<bos>", "<eos>", "a", "b"}));
  EXPECT_EQ(v.encode({"c"}), (std::vector<int>{Vocabulary::kUnk}));
}

TEST(Vocabulary, SingleTokenCorpus) { EXPECT_EQ(Vocabulary::build({{"x"}}, 5).size(), 5u); }

TEST(Vocabulary, TiesBrokenLexicographically) {
  const Vocabulary v = Vocabulary::build({{"zeta", "alpha", "mid", "mid"}}, 6);
  EXPECT_EQ(v.token(4), "mid");
  EXPECT_EQ(v.token(5), "alpha");
}

TEST(Vocabulary, RejectsBadInputs) {
  EXPECT_THROW(Vocabulary::build({{"a"}}, 4), ContractError);
  EXPECT_THROW(Vocabulary::build({}, 10), DataError);
  EXPECT_THROW(Vocabulary::build({{}}, 10), DataError);
}

TEST(Vocabulary, RoundTripAndBijection) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Corpus c = random_words_corpus(rng, 30, "abcde");
    const std::size_t max_size = 5 + uniform_index(rng, 40);
    const Vocabulary v = Vocabulary::build(c, max_size);
    EXPECT_LE(v.size(), max_size);
    std::set<std::string> seen(v.tokens().begin(), v.tokens().end());
    EXPECT_EQ(seen.size(), v.size());
    for (std::size_t id = 0; id < v.size(); ++id) EXPECT_EQ(v.id(v.token(static_cast<int>(id))), static_cast<int>(id));
    for (const auto& s : c) {
      Sentence in_vocab;
      for (const auto& w : s) {
        if (v.find(w)) in_vocab.push_back(w);
      }
      EXPECT_EQ(v.decode(v.encode(in_vocab)), in_vocab);
    }
    EXPECT_EQ(Vocabulary::from_text(v.to_text()), v);
  }
}

TEST(Vocabulary, FileFormatIsTokenIdCount) {
  const Vocabulary v = Vocabulary::build({{"a", "a", "b"}}, 6);
  const std::string text = v.to_text();
  EXPECT_NE(text.find("a\t4\t2\n"), std::string::npos);
  EXPECT_NE(text.find("b\t5\t1\n"), std::string::npos);
  EXPECT_THROW(Vocabulary::from_text("a\t0\t1\n"), DataError);
}

TEST(Bpe, ZeroOpsIsCharacterLevel) {
  const BpeModel bpe = BpeModel::learn({{"abc"}}, 0);
  EXPECT_TRUE(bpe.merges().empty());
  EXPECT_EQ(bpe.encode({"abc"}), (Sentence{"a@@", "b@@", "c"}));
}

TEST(Bpe, FirstMergeOfRepeatedWord) {
  const BpeModel bpe = BpeModel::learn({{"ab"}, {"ab"}}, 1);
  ASSERT_EQ(bpe.merges().size(), 1u);
  EXPECT_EQ(bpe.merges()[0], (BpeModel::Merge{"a", "b"}));
}

TEST(Bpe, MergeCountIsBoundedByAvailablePairs) {
  const BpeModel bpe = BpeModel::learn({{"abc"}}, 50);
  EXPECT_EQ(bpe.merges().size(), 2u);
  EXPECT_TRUE(BpeModel::learn({}, 10).merges().empty());
}

TEST(Bpe, MatchesReferenceLearner) {
  Rng rng(17);
  for (int trial = 0; trial < 15; ++trial) {
    const Corpus c = random_words_corpus(rng, 25, "abcd");
    const std::size_t ops = uniform_index(rng, 30);
    EXPECT_EQ(BpeModel::learn(c, ops).merges(), reference_bpe(c, ops)) << "trial " << trial;
  }
}

TEST(Bpe, RoundTripAndIdempotence) {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const Corpus c = random_words_corpus(rng, 20, "abcxyz");
    const BpeModel bpe = BpeModel::learn(c, uniform_index(rng, 40));
    for (const auto& s : random_words_corpus(rng, 10, "abcxyzq")) {
      EXPECT_EQ(BpeModel::decode(bpe.encode(s)), s);
      for (const auto& w : s) {
        const auto once = bpe.segment_word(w);
        EXPECT_EQ(bpe.apply_merges(once), once);
      }
    }
  }
}

TEST(Bpe, MultibyteCharactersStayWhole) {
  const BpeModel bpe = BpeModel::learn({}, 0);
  EXPECT_EQ(bpe.segment_word("\xE3\x80\x8Cx"), (std::vector<std::string>{"\xE3\x80\x8C", "x"}));
}

TEST(Bpe, TextFormatRoundTrip) {
  const BpeModel bpe = BpeModel::learn({{"abab", "abc"}}, 3);
  EXPECT_EQ(BpeModel::from_text(bpe.to_text()).merges(), bpe.merges());
  EXPECT_EQ(bpe.to_text().substr(0, 4), "a b\n");
}

TEST(Synthetic, DeterministicForSeed) {
  const auto a = generate_synthetic(7, 40, 20), b = generate_synthetic(7, 40, 20);
  EXPECT_EQ(a.source, b.source);
  EXPECT_EQ(a.target, b.target);
  EXPECT_NE(generate_synthetic(8, 40, 20).source, a.source);
}

TEST(Synthetic, TargetsAreBalancedAndMapOneToOne) {
  const auto lex = SyntheticLexicon::make(20);
  const auto c = generate_synthetic(3, 300, 20);
  bool any_bracket = false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_GE(c.source[i].size(), kSyntheticMinLength);
    EXPECT_LE(c.source[i].size(), kSyntheticMaxLength);
    EXPECT_TRUE(brackets_balanced(c.target[i], lex));
    Sentence content;
    for (const auto& w : c.target[i]) {
      if (w == lex.open_bracket || w == lex.close_bracket) {
        any_bracket = true;
      } else {
        content.push_back(w);
      }
    }
    EXPECT_EQ(content, lex.translate(c.source[i]));
    std::multiset<std::string> mapped;
    for (const auto& w : c.source[i]) {
      const auto pos = std::find(lex.source_words.begin(), lex.source_words.end(), w) - lex.source_words.begin();
      mapped.insert(lex.target_words[static_cast<std::size_t>(pos)]);
    }
    EXPECT_EQ(mapped, std::multiset<std::string>(content.begin(), content.end()));
  }
  EXPECT_TRUE(any_bracket);
}

TEST(Synthetic, RejectsTinyVocabulary) { EXPECT_THROW(generate_synthetic(1, 5, 7), ContractError); }

TEST(Synthetic, MonolingualTextIsBalanced) {
  const auto lex = SyntheticLexicon::make(20);
  for (const auto& s : generate_monolingual(5, 100, 20)) EXPECT_TRUE(brackets_balanced(s, lex));
}

TEST(Corpus, FilterRespectsMaxTokens) {
  const auto c = generate_synthetic(9, 200, 20);
  const auto f = filter_max_tokens(c, 8);
  EXPECT_LT(f.size(), c.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_LE(f.source[i].size(), 8u);
    EXPECT_LE(f.target[i].size(), 8u);
  }
}

TEST(Corpus, FileRoundTripAndLineCountCheck) {
  const auto dir = std::filesystem::temp_directory_path() / "fusemt_corpus_test";
  std::filesystem::create_directories(dir);
  const Corpus a = {{"x", "y"}, {}, {"z"}};
  write_corpus(dir / "a.txt", a);
  EXPECT_EQ(read_corpus(dir / "a.txt"), a);
  write_corpus(dir / "b.txt", {{"q"}});
  EXPECT_THROW(read_parallel(dir / "a.txt", dir / "b.txt"), DataError);
  EXPECT_THROW(read_corpus(dir / "missing.txt"), DataError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace fusemt
