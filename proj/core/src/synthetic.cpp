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

#include "fusemt/synthetic.hpp"

#include <algorithm>
#include <array>

#include "fusemt/errors.hpp"
#include "fusemt/params.hpp"

namespace fusemt {

namespace {

constexpr std::array<const char*, 20> kTargetSyllables = {"ka", "ki", "ku", "ke", "ko", "sa", "shi", "su", "se", "so",
                                                          "ta", "chi", "tsu", "te", "to", "na", "ni", "nu", "ne", "no"};
constexpr std::array<const char*, 20> kSourceSyllables = {"ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du",
                                                          "ga", "ge", "gi", "go", "gu", "ma", "me", "mi", "mo", "mu"};

template <std::size_t N>
std::string spell(std::size_t i, const std::array<const char*, N>& syllables) {
  // Two syllables for the first N*N words, then a third. Distinct i give
  // distinct strings, and words share syllables, which BPE can exploit.
  std::string w = syllables[i % N];
  w += syllables[(i / N) % N];
  if (i >= N * N) w += syllables[(i / (N * N)) % N];
  return w;
}

void check_args(std::size_t n, std::size_t vocab_size) {
  if (vocab_size < 8) throw ContractError("generate_synthetic: vocab_size must be >= 8");
  if (n < 1) throw ContractError("generate_synthetic: need at least one sentence");
}

std::pair<Sentence, Sentence> draw_pair(Rng& rng, const SyntheticLexicon& lex) {
  const std::size_t len = kSyntheticMinLength + uniform_index(rng, kSyntheticMaxLength - kSyntheticMinLength + 1);
  Sentence src;
  for (std::size_t i = 0; i < len; ++i) src.push_back(lex.source_words[uniform_index(rng, lex.source_words.size())]);
  Sentence tgt = lex.translate(src);
  if (uniform01(rng) < 0.5) {
    const std::size_t open = uniform_index(rng, tgt.size());
    const std::size_t close = open + 1 + uniform_index(rng, tgt.size() - open);
    tgt.insert(tgt.begin() + static_cast<std::ptrdiff_t>(close), lex.close_bracket);
    tgt.insert(tgt.begin() + static_cast<std::ptrdiff_t>(open), lex.open_bracket);
  }
  return {std::move(src), std::move(tgt)};
}

}  // namespace

SyntheticLexicon SyntheticLexicon::make(std::size_t vocab_size) {
  SyntheticLexicon lex;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    lex.source_words.push_back(spell(i, kSourceSyllables));
    lex.target_words.push_back(spell(i, kTargetSyllables));
  }
  return lex;
}

Sentence SyntheticLexicon::translate(const Sentence& source) const {
  Sentence out;
  for (auto it = source.rbegin(); it != source.rend(); ++it) {
    auto pos = std::find(source_words.begin(), source_words.end(), *it);
    if (pos == source_words.end()) throw DataError("synthetic: unknown source word '" + *it + "'");
    out.push_back(target_words[static_cast<std::size_t>(pos - source_words.begin())]);
  }
  return out;
}

ParallelCorpus generate_synthetic(std::uint64_t seed, std::size_t n_pairs, std::size_t vocab_size) {
  check_args(n_pairs, vocab_size);
  const auto lex = SyntheticLexicon::make(vocab_size);
  Rng rng(seed);
  ParallelCorpus pc;
  pc.provenance = "synthetic seed=" + std::to_string(seed) + " vocab=" + std::to_string(vocab_size);
  for (std::size_t n = 0; n < n_pairs; ++n) {
    auto [src, tgt] = draw_pair(rng, lex);
    pc.source.push_back(std::move(src));
    pc.target.push_back(std::move(tgt));
  }
  return pc;
}

Corpus generate_monolingual(std::uint64_t seed, std::size_t n_sentences, std::size_t vocab_size) {
  check_args(n_sentences, vocab_size);
  const auto lex = SyntheticLexicon::make(vocab_size);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Corpus out;
  for (std::size_t n = 0; n < n_sentences; ++n) out.push_back(draw_pair(rng, lex).second);
  return out;
}

bool brackets_balanced(const Sentence& target, const SyntheticLexicon& lexicon) {
  int depth = 0;
  for (const auto& t : target) {
    if (t == lexicon.open_bracket) ++depth;
    if (t == lexicon.close_bracket && --depth < 0) return false;
  }
  return depth == 0;
}

}  // namespace fusemt
