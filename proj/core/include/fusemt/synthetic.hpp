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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fusemt/corpus.hpp"

namespace fusemt {

// Toy language pair used for desk-scale experiments.
//
// A source sentence is 3-12 content words drawn uniformly from the source
// lexicon. Its translation maps every word through a fixed bijection and
// reverses the order. With probability 1/2 a bracket pair is then inserted
// around a random non-empty span of the target, so the only thing a
// target-side model can learn beyond the lexicon is that an open bracket
// must eventually be closed.
struct SyntheticLexicon {
  std::vector<std::string> source_words;
  std::vector<std::string> target_words;
  std::string open_bracket = "\xE3\x80\x8C";   // 「
  std::string close_bracket = "\xE3\x80\x8D";  // 」

  static SyntheticLexicon make(std::size_t vocab_size);
  Sentence translate(const Sentence& source) const;
};

inline constexpr std::size_t kSyntheticMinLength = 3;
inline constexpr std::size_t kSyntheticMaxLength = 12;

// Requires vocab_size >= 8 and n_pairs >= 1. Deterministic in the seed.
ParallelCorpus generate_synthetic(std::uint64_t seed, std::size_t n_pairs, std::size_t vocab_size);
// Target-side sentences drawn from the same process on an independent stream.
Corpus generate_monolingual(std::uint64_t seed, std::size_t n_sentences, std::size_t vocab_size);

// True when every open bracket is closed and closes never precede opens.
bool brackets_balanced(const Sentence& target, const SyntheticLexicon& lexicon);

}  // namespace fusemt
