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

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fusemt/corpus.hpp"

namespace fusemt {

// Token <-> id bijection. Ids 0-3 are always pad, unk, bos, eos.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr std::size_t kReserved = 4;
  static constexpr std::array<std::string_view, kReserved> kSpecials = {"<pad>", "<unk>", "<bos>", "<eos>"};

  Vocabulary();

  // Keeps the (max_size - 4) most frequent tokens, ties broken
  // lexicographically. Requires max_size > 4 and at least one token.
  static Vocabulary build(const Corpus& corpus, std::size_t max_size);

  std::size_t size() const noexcept { return tokens_.size(); }
  // kUnk for unknown tokens.
  int id(std::string_view token) const;
  std::optional<int> find(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t count(int id) const;
  bool valid(int id) const noexcept { return id >= 0 && static_cast<std::size_t>(id) < tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<int> encode(const Sentence& tokens) const;
  // Stops at eos; skips pad and bos.
  Sentence decode(std::span<const int> ids) const;

  // "token<TAB>id<TAB>count" per line, sorted by id.
  std::string to_text() const;
  static Vocabulary from_text(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  int add(std::string token, std::size_t count);

  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace fusemt
