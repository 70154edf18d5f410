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
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fusemt/corpus.hpp"

namespace fusemt {

// Splits a UTF-8 string into code points (invalid bytes become single units).
std::vector<std::string> utf8_chars(std::string_view s);

// Byte pair encoding. Words are segmented into pieces; every piece except
// the last of a word carries the "@@" continuation marker.
class BpeModel {
 public:
  using Merge = std::pair<std::string, std::string>;
  static constexpr std::string_view kContinuation = "@@";

  BpeModel() = default;
  explicit BpeModel(std::vector<Merge> merges);

  // Greedy most-frequent-pair merging, ties broken by lexicographic pair
  // order. Stops early when no adjacent pair remains.
  static BpeModel learn(const Corpus& corpus, std::size_t n_ops);

  const std::vector<Merge>& merges() const noexcept { return merges_; }

  // Applies merges (lowest rank first) to a symbol sequence until none applies.
  std::vector<std::string> apply_merges(std::vector<std::string> symbols) const;
  // Pieces of one word, without markers.
  std::vector<std::string> segment_word(std::string_view word) const;

  Sentence encode(const Sentence& sentence) const;
  static Sentence decode(const Sentence& pieces);
  static bool continues(std::string_view piece);

  // One "left right" pair per line, in merge order.
  std::string to_text() const;
  static BpeModel from_text(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static BpeModel load(const std::filesystem::path& path);

 private:
  std::vector<Merge> merges_;
  std::map<Merge, std::size_t> rank_;
};

}  // namespace fusemt
