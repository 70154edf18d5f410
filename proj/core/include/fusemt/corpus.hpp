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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fusemt {

using Sentence = std::vector<std::string>;
using Corpus = std::vector<Sentence>;

struct ParallelCorpus {
  Corpus source;
  Corpus target;
  std::string provenance;

  std::size_t size() const noexcept { return source.size(); }
};

// Splits on spaces; runs of spaces and a trailing '\r' are tolerated.
Sentence split_tokens(std::string_view line);
std::string join_tokens(const Sentence& tokens);

// One sentence per line, UTF-8, tokens separated by single spaces.
Corpus read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);
ParallelCorpus read_parallel(const std::filesystem::path& source, const std::filesystem::path& target);

// Drops pairs where either side has more than max_tokens tokens.
ParallelCorpus filter_max_tokens(const ParallelCorpus& corpus, std::size_t max_tokens);

}  // namespace fusemt
