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

#include "fusemt/bpe.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "fusemt/errors.hpp"

namespace fusemt {

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
    }
    if (i + len > s.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

namespace {

// Merges every non-overlapping occurrence of `m`, scanning left to right.
bool merge_in_place(std::vector<std::string>& symbols, const BpeModel::Merge& m) {
  bool changed = false;
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == m.first && symbols[i + 1] == m.second) {
      out.push_back(symbols[i] + symbols[i + 1]);
      ++i;
      changed = true;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
  return changed;
}

}  // namespace

BpeModel::BpeModel(std::vector<Merge> merges) : merges_(std::move(merges)) {
  for (std::size_t i = 0; i < merges_.size(); ++i) rank_.emplace(merges_[i], i);
}

BpeModel BpeModel::learn(const Corpus& corpus, std::size_t n_ops) {
  std::map<std::string, std::size_t> word_freq;
  for (const auto& s : corpus) {
    for (const auto& w : s) ++word_freq[w];
  }
  std::vector<std::vector<std::string>> words;
  std::vector<std::size_t> freq;
  for (const auto& [w, f] : word_freq) {
    words.push_back(utf8_chars(w));
    freq.push_back(f);
  }

  std::vector<Merge> merges;
  for (std::size_t op = 0; op < n_ops; ++op) {
    std::map<Merge, std::size_t> pairs;
    for (std::size_t k = 0; k < words.size(); ++k) {
      const auto& sym = words[k];
      for (std::size_t i = 0; i + 1 < sym.size(); ++i) pairs[{sym[i], sym[i + 1]}] += freq[k];
    }
    if (pairs.empty()) break;
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const Merge m = best->first;
    for (auto& sym : words) merge_in_place(sym, m);
    merges.push_back(m);
  }
  return BpeModel(std::move(merges));
}

std::vector<std::string> BpeModel::apply_merges(std::vector<std::string> symbols) const {
  while (symbols.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank_.find({symbols[i], symbols[i + 1]});
      if (it != rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    merge_in_place(symbols, merges_[best_rank]);
  }
  return symbols;
}

std::vector<std::string> BpeModel::segment_word(std::string_view word) const {
  return apply_merges(utf8_chars(word));
}

Sentence BpeModel::encode(const Sentence& sentence) const {
  Sentence out;
  for (const auto& w : sentence) {
    auto pieces = segment_word(w);
    for (std::size_t i = 0; i + 1 < pieces.size(); ++i) out.push_back(pieces[i] + std::string(kContinuation));
    if (!pieces.empty()) out.push_back(std::move(pieces.back()));
  }
  return out;
}

bool BpeModel::continues(std::string_view piece) {
  return piece.size() > kContinuation.size() && piece.ends_with(kContinuation);
}

Sentence BpeModel::decode(const Sentence& pieces) {
  Sentence out;
  std::string pending;
  for (const auto& p : pieces) {
    if (continues(p)) {
      pending.append(p, 0, p.size() - kContinuation.size());
    } else {
      out.push_back(pending + p);
      pending.clear();
    }
  }
  if (!pending.empty()) out.push_back(pending);
  return out;
}

std::string BpeModel::to_text() const {
  std::ostringstream os;
  for (const auto& [l, r] : merges_) os << l << ' ' << r << '\n';
  return os.str();
}

BpeModel BpeModel::from_text(std::string_view text) {
  std::vector<Merge> merges;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string_view::npos || sp == 0 || sp + 1 >= line.size() || line.find(' ', sp + 1) != std::string_view::npos) {
      throw DataError("bpe merges line " + std::to_string(line_no) + ": expected \"left right\"");
    }
    merges.emplace_back(std::string(line.substr(0, sp)), std::string(line.substr(sp + 1)));
  }
  return BpeModel(std::move(merges));
}

void BpeModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write bpe file " + path.string());
  out << to_text();
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open bpe file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace fusemt
