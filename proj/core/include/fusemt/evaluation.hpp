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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusemt/corpus.hpp"
#include "fusemt/decoding.hpp"
#include "fusemt/fusion.hpp"

namespace fusemt {

// Clipped n-gram statistics, n = 1..4. Sentence statistics add up to corpus
// statistics.
struct BleuStats {
  static constexpr std::size_t kOrder = 4;
  std::array<std::size_t, kOrder> matches{};
  std::array<std::size_t, kOrder> totals{};
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  BleuStats& operator+=(const BleuStats& o);
  bool operator==(const BleuStats&) const = default;
};

BleuStats bleu_stats(const Sentence& hypothesis, const Sentence& reference);
// 100 * BP * geometric mean of clipped precisions, unsmoothed. Orders for
// which the hypotheses contain no n-grams at all are left out of the mean;
// an order with n-grams but no matches gives 0. An empty hypothesis side
// gives 0.
double bleu_from_stats(const BleuStats& stats);
// Case-sensitive corpus BLEU on pre-tokenised text. Line counts must agree.
double bleu(const Corpus& hypotheses, const Corpus& references);

struct RibesScore {
  double nkt = 0.0;
  double precision = 0.0;
  double bp = 0.0;
  double value = 0.0;
};

inline constexpr double kRibesAlpha = 0.25;
inline constexpr double kRibesBeta = 0.10;

// Word-order metric. Hypothesis words are aligned to reference positions by
// unique unigram, then by growing left/right context until the match is
// unique on both sides, then by the full two-sided context. Fewer than two
// alignments score 0, except a one-word reference matched once.
RibesScore ribes(const Sentence& hypothesis, const Sentence& reference);
// Mean sentence RIBES in [0, 1].
double corpus_ribes(const Corpus& hypotheses, const Corpus& references);

enum class Metric { Bleu, Ribes };

struct BootstrapResult {
  double p_value = 1.0;  // fraction of samples with B >= A
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t ties = 0;
  std::size_t samples = 0;
};

// One-sided paired bootstrap testing "A is better than B". Each resample
// draws from its own generator seeded by (seed, sample index).
BootstrapResult paired_bootstrap(const Corpus& system_a, const Corpus& system_b, const Corpus& references,
                                 std::size_t n_samples = 10000, Metric metric = Metric::Bleu,
                                 std::uint64_t seed = 1);

struct ScoreReport {
  double bleu = 0.0;   // 0-100
  double ribes = 0.0;  // 0-100
  std::optional<BootstrapResult> versus_rival;
};

ScoreReport score_corpus(const Corpus& hypotheses, const Corpus& references, const Corpus* rival = nullptr,
                         std::size_t n_samples = 10000, std::uint64_t seed = 1);
// "BLEU\t..\nRIBES\t..\n" plus "P-VALUE\t..\n" with a rival.
std::string format_report(const ScoreReport& report);

// ---------------------------------------------------------------------------

struct AttentionRecord {
  std::size_t position = 0;  // 1-based index of the emitted token
  std::string token;
  std::vector<std::pair<std::string, double>> top;  // descending weight
};

inline constexpr std::size_t kAttentionTopK = 5;

// Largest k entries, descending, lower index first on ties.
std::vector<std::pair<std::size_t, double>> top_k(std::span<const double> weights, std::size_t k);

// Word-attention trace of a dynamic-fusion translation, one record per
// emitted token. Other variants raise UnsupportedVariant.
template <typename T>
std::vector<AttentionRecord> dump_attention(const FusedModel<T>& model, std::span<const int> source,
                                            const SearchOptions& search);

// Records from an already decoded hypothesis.
template <typename T>
std::vector<AttentionRecord> attention_records(const FusedModel<T>& model,
                                               const Hypothesis<typename FusedStepModel<T>::State>& hyp);

// Mantissa with one decimal and an unpadded exponent: 9.9e-1, 3.0e-3, 1.0.
std::string format_weight(double w);
// "position<TAB>token<TAB>word:weight,word:weight,..." per record.
std::string format_attention(const std::vector<AttentionRecord>& records);

struct FrobeniusSplit {
  double norm_tm = 0.0;  // rows [0, h): multiply S_TM
  double norm_lm = 0.0;  // rows [h, 2h): multiply c_LM
  double ratio = 0.0;    // norm_tm / norm_lm; +inf when the LM half is zero
};

template <typename T>
FrobeniusSplit frobenius_decomposition(const Tensor<T>& W);

}  // namespace fusemt
