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

#include "fusemt/corpus.hpp"

#include <fstream>

#include "fusemt/errors.hpp"

namespace fusemt {

Sentence split_tokens(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  Sentence out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const std::size_t next = line.find(' ', pos);
    const std::size_t end = next == std::string_view::npos ? line.size() : next;
    if (end > pos) out.emplace_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

std::string join_tokens(const Sentence& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) corpus.push_back(split_tokens(line));
  return corpus;
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  for (const auto& s : corpus) out << join_tokens(s) << '\n';
}

ParallelCorpus read_parallel(const std::filesystem::path& source, const std::filesystem::path& target) {
  ParallelCorpus pc;
  pc.source = read_corpus(source);
  pc.target = read_corpus(target);
  if (pc.source.size() != pc.target.size()) {
    throw DataError("parallel corpus line counts differ: " + source.string() + " has " +
                    std::to_string(pc.source.size()) + ", " + target.string() + " has " +
                    std::to_string(pc.target.size()));
  }
  pc.provenance = source.string() + " | " + target.string();
  return pc;
}

ParallelCorpus filter_max_tokens(const ParallelCorpus& corpus, std::size_t max_tokens) {
  ParallelCorpus out;
  out.provenance = corpus.provenance;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.source[i].size() > max_tokens || corpus.target[i].size() > max_tokens) continue;
    out.source.push_back(corpus.source[i]);
    out.target.push_back(corpus.target[i]);
  }
  return out;
}

}  // namespace fusemt
