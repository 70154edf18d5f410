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

#include "fusemt/vocabulary.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "fusemt/errors.hpp"

namespace fusemt {

Vocabulary::Vocabulary() {
  for (auto s : kSpecials) add(std::string(s), 0);
}

int Vocabulary::add(std::string token, std::size_t count) {
  const int id = static_cast<int>(tokens_.size());
  index_.emplace(token, id);
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
  return id;
}

Vocabulary Vocabulary::build(const Corpus& corpus, std::size_t max_size) {
  if (max_size <= kReserved) {
    throw ContractError("build_vocab: max_size must exceed " + std::to_string(kReserved) + ", got " +
                        std::to_string(max_size));
  }
  std::map<std::string, std::size_t, std::less<>> freq;
  std::size_t total = 0;
  for (const auto& s : corpus) {
    for (const auto& tok : s) {
      ++freq[tok];
      ++total;
    }
  }
  if (total == 0) throw DataError("build_vocab: empty corpus");

  Vocabulary v;
  for (auto s : kSpecials) freq.erase(std::string(s));
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  // freq is name-ordered, so a stable sort on count leaves ties lexicographic.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - kReserved);
  for (std::size_t i = 0; i < keep; ++i) v.add(ranked[i].first, ranked[i].second);
  return v;
}

int Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnk); }

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (!valid(id)) throw ContractError("vocabulary id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::size_t Vocabulary::count(int id) const {
  if (!valid(id)) throw ContractError("vocabulary id " + std::to_string(id) + " out of range");
  return counts_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const Sentence& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Sentence Vocabulary::decode(std::span<const int> ids) const {
  Sentence out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    out.push_back(token(id));
  }
  return out;
}

std::string Vocabulary::to_text() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < tokens_.size(); ++i) os << tokens_[i] << '\t' << i << '\t' << counts_[i] << '\n';
  return os.str();
}

Vocabulary Vocabulary::from_text(std::string_view text) {
  Vocabulary v;
  v.tokens_.clear();
  v.counts_.clear();
  v.index_.clear();
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) throw DataError("vocab line " + std::to_string(line_no) + ": expected 3 fields");
    std::size_t id = 0, count = 0;
    auto f1 = line.substr(t1 + 1, t2 - t1 - 1);
    auto f2 = line.substr(t2 + 1);
    if (std::from_chars(f1.data(), f1.data() + f1.size(), id).ec != std::errc{} ||
        std::from_chars(f2.data(), f2.data() + f2.size(), count).ec != std::errc{}) {
      throw DataError("vocab line " + std::to_string(line_no) + ": malformed id or count");
    }
    if (id != v.tokens_.size()) throw DataError("vocab line " + std::to_string(line_no) + ": ids must be dense and sorted");
    std::string tok(line.substr(0, t1));
    if (v.index_.count(tok)) throw DataError("vocab line " + std::to_string(line_no) + ": duplicate token '" + tok + "'");
    v.add(std::move(tok), count);
  }
  if (v.tokens_.size() < kReserved) throw DataError("vocab: missing reserved tokens");
  for (std::size_t i = 0; i < kReserved; ++i) {
    if (v.tokens_[i] != kSpecials[i]) throw DataError("vocab: reserved id " + std::to_string(i) + " must be " + std::string(kSpecials[i]));
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocab file " + path.string());
  out << to_text();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocab file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace fusemt
