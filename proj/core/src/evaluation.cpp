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

#include "fusemt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <unordered_map>

#include "fusemt/params.hpp"

namespace fusemt {

namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts ngrams(const Sentence& s, std::size_t n) {
  NgramCounts out;
  if (s.size() < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    std::string key = s[i];
    for (std::size_t k = 1; k < n; ++k) {
      key += '\x1f';
      key += s[i + k];
    }
    ++out[key];
  }
  return out;
}

void check_lines(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DataError(std::string(what) + ": line counts differ (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Positions j in `text` whose occurrence of the word at `pos` in `hyp`
// extends to the left/right context of length `window`.
void narrow_left(std::vector<int>& cands, const Sentence& text, const Sentence& hyp, int i, int window) {
  std::vector<int> kept;
  for (int j : cands) {
    if (window <= j && text[static_cast<std::size_t>(j - window)] == hyp[static_cast<std::size_t>(i - window)]) {
      kept.push_back(j);
    }
  }
  cands = std::move(kept);
}

void narrow_right(std::vector<int>& cands, const Sentence& text, const Sentence& hyp, int i, int window) {
  std::vector<int> kept;
  for (int j : cands) {
    if (j + window < static_cast<int>(text.size()) &&
        text[static_cast<std::size_t>(j + window)] == hyp[static_cast<std::size_t>(i + window)]) {
      kept.push_back(j);
    }
  }
  cands = std::move(kept);
}

std::vector<int> intersect(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (std::size_t n = 0; n < kOrder; ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  hyp_length += o.hyp_length;
  ref_length += o.ref_length;
  return *this;
}

BleuStats bleu_stats(const Sentence& hypothesis, const Sentence& reference) {
  BleuStats st;
  st.hyp_length = hypothesis.size();
  st.ref_length = reference.size();
  for (std::size_t n = 1; n <= BleuStats::kOrder; ++n) {
    const NgramCounts h = ngrams(hypothesis, n), r = ngrams(reference, n);
    for (const auto& [gram, count] : h) {
      st.totals[n - 1] += count;
      auto it = r.find(gram);
      if (it != r.end()) st.matches[n - 1] += std::min(count, it->second);
    }
  }
  return st;
}

double bleu_from_stats(const BleuStats& st) {
  if (st.hyp_length == 0) return 0.0;
  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < BleuStats::kOrder; ++n) {
    if (st.totals[n] == 0) continue;
    if (st.matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(st.matches[n]) / static_cast<double>(st.totals[n]));
    ++orders;
  }
  const double c = static_cast<double>(st.hyp_length), r = static_cast<double>(st.ref_length);
  const double bp = std::min(1.0, std::exp(1.0 - r / c));
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(orders));
}

double bleu(const Corpus& hypotheses, const Corpus& references) {
  check_lines(hypotheses.size(), references.size(), "bleu");
  BleuStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += bleu_stats(hypotheses[i], references[i]);
  return bleu_from_stats(total);
}

RibesScore ribes(const Sentence& hyp, const Sentence& ref) {
  if (ref.empty()) throw DataError("ribes: empty reference");
  RibesScore out;
  if (hyp.empty()) return out;
  out.bp = std::min(1.0, std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size())));

  std::map<std::string, std::vector<int>> ref_pos, hyp_pos;
  for (std::size_t i = 0; i < ref.size(); ++i) ref_pos[ref[i]].push_back(static_cast<int>(i));
  for (std::size_t i = 0; i < hyp.size(); ++i) hyp_pos[hyp[i]].push_back(static_cast<int>(i));

  const int H = static_cast<int>(hyp.size());
  std::vector<int> aligned;
  for (int i = 0; i < H; ++i) {
    auto rit = ref_pos.find(hyp[static_cast<std::size_t>(i)]);
    if (rit == ref_pos.end()) continue;
    const auto& ref_match = rit->second;
    const auto& hyp_match = hyp_pos[hyp[static_cast<std::size_t>(i)]];
    if (ref_match.size() == 1 && hyp_match.size() == 1) {
      aligned.push_back(ref_match[0]);
      continue;
    }
    std::vector<int> left_ref = ref_match, left_hyp = hyp_match, right_ref = ref_match, right_hyp = hyp_match;
    bool found = false;
    for (int window = 1; window <= std::max(i, H - 1 - i) && !found; ++window) {
      if (window <= i) {
        narrow_left(left_ref, ref, hyp, i, window);
        narrow_left(left_hyp, hyp, hyp, i, window);
        if (left_ref.size() == 1 && left_hyp.size() == 1) {
          aligned.push_back(left_ref[0]);
          found = true;
          break;
        }
      }
      if (i + window < H) {
        narrow_right(right_ref, ref, hyp, i, window);
        narrow_right(right_hyp, hyp, hyp, i, window);
        if (right_ref.size() == 1 && right_hyp.size() == 1) {
          aligned.push_back(right_ref[0]);
          found = true;
        }
      }
    }
    if (found) continue;
    // Neither side alone is decisive; use the whole two-sided context.
    const auto both_ref = intersect(left_ref, right_ref), both_hyp = intersect(left_hyp, right_hyp);
    if (both_ref.size() == 1 && both_hyp.size() == 1) aligned.push_back(both_ref[0]);
  }

  const std::size_t n = aligned.size();
  if (n == 1 && ref.size() == 1) {
    out.nkt = 1.0;
    out.precision = 1.0 / static_cast<double>(hyp.size());
  } else if (n < 2) {
    out.nkt = 0.0;
    out.precision = 0.0;
  } else {
    std::size_t ascending = 0;
    for (std::size_t a = 0; a + 1 < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) ascending += aligned[a] < aligned[b] ? 1 : 0;
    }
    out.nkt = static_cast<double>(ascending) / static_cast<double>(n * (n - 1) / 2);
    out.precision = static_cast<double>(n) / static_cast<double>(hyp.size());
  }
  out.value = out.nkt * std::pow(out.precision, kRibesAlpha) * std::pow(out.bp, kRibesBeta);
  return out;
}

double corpus_ribes(const Corpus& hypotheses, const Corpus& references) {
  check_lines(hypotheses.size(), references.size(), "ribes");
  if (hypotheses.empty()) throw DataError("ribes: empty corpus");
  double sum = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) sum += ribes(hypotheses[i], references[i]).value;
  return sum / static_cast<double>(hypotheses.size());
}

BootstrapResult paired_bootstrap(const Corpus& system_a, const Corpus& system_b, const Corpus& references,
                                 std::size_t n_samples, Metric metric, std::uint64_t seed) {
  check_lines(system_a.size(), references.size(), "paired_bootstrap");
  check_lines(system_b.size(), references.size(), "paired_bootstrap");
  if (references.empty()) throw DataError("paired_bootstrap: empty corpus");
  if (n_samples == 0) throw ContractError("paired_bootstrap: need at least one sample");
  const std::size_t N = references.size();

  std::vector<BleuStats> sa, sb;
  std::vector<double> ra, rb;
  if (metric == Metric::Bleu) {
    for (std::size_t i = 0; i < N; ++i) {
      sa.push_back(bleu_stats(system_a[i], references[i]));
      sb.push_back(bleu_stats(system_b[i], references[i]));
    }
  } else {
    for (std::size_t i = 0; i < N; ++i) {
      ra.push_back(ribes(system_a[i], references[i]).value);
      rb.push_back(ribes(system_b[i], references[i]).value);
    }
  }

  BootstrapResult res;
  res.samples = n_samples;
  for (std::size_t s = 0; s < n_samples; ++s) {
    Rng rng(splitmix64(seed ^ splitmix64(s)));
    double a = 0.0, b = 0.0;
    if (metric == Metric::Bleu) {
      BleuStats ta, tb;
      for (std::size_t k = 0; k < N; ++k) {
        const std::size_t i = uniform_index(rng, N);
        ta += sa[i];
        tb += sb[i];
      }
      a = bleu_from_stats(ta);
      b = bleu_from_stats(tb);
    } else {
      for (std::size_t k = 0; k < N; ++k) {
        const std::size_t i = uniform_index(rng, N);
        a += ra[i];
        b += rb[i];
      }
    }
    if (a > b) {
      ++res.wins_a;
    } else if (b > a) {
      ++res.wins_b;
    } else {
      ++res.ties;
    }
  }
  res.p_value = static_cast<double>(res.wins_b + res.ties) / static_cast<double>(n_samples);
  return res;
}

ScoreReport score_corpus(const Corpus& hypotheses, const Corpus& references, const Corpus* rival,
                         std::size_t n_samples, std::uint64_t seed) {
  ScoreReport r;
  r.bleu = bleu(hypotheses, references);
  r.ribes = 100.0 * corpus_ribes(hypotheses, references);
  if (rival) r.versus_rival = paired_bootstrap(hypotheses, *rival, references, n_samples, Metric::Bleu, seed);
  return r;
}

std::string format_report(const ScoreReport& report) {
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof buf, "BLEU\t%.2f\nRIBES\t%.2f\n", report.bleu, report.ribes);
  out += buf;
  if (report.versus_rival) {
    std::snprintf(buf, sizeof buf, "P-VALUE\t%.4f\n", report.versus_rival->p_value);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::size_t, double>> top_k(std::span<const double> weights, std::size_t k) {
  std::vector<std::pair<std::size_t, double>> all;
  for (std::size_t i = 0; i < weights.size(); ++i) all.emplace_back(i, weights[i]);
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  all.resize(k);
  return all;
}

template <typename T>
std::vector<AttentionRecord> attention_records(const FusedModel<T>& model,
                                               const Hypothesis<typename FusedStepModel<T>::State>& hyp) {
  if (model.variant() != Variant::Dynamic) {
    throw UnsupportedVariant("attention dump needs a dynamic fusion model, got " +
                             std::string(variant_name(model.variant())));
  }
  const auto& lm_vocab = model.lm()->vocab();
  const auto& tgt_vocab = model.tm().target_vocab();
  std::vector<AttentionRecord> out;
  for (std::size_t k = 0; k < hyp.tokens.size(); ++k) {
    const auto& alpha = hyp.history[k]->alpha;
    std::vector<double> w(alpha.begin(), alpha.end());
    AttentionRecord rec;
    rec.position = k + 1;
    rec.token = tgt_vocab.token(hyp.tokens[k]);
    for (const auto& [id, weight] : top_k(w, kAttentionTopK)) {
      rec.top.emplace_back(lm_vocab.token(static_cast<int>(id)), weight);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

template <typename T>
std::vector<AttentionRecord> dump_attention(const FusedModel<T>& model, std::span<const int> source,
                                            const SearchOptions& search) {
  if (model.variant() != Variant::Dynamic) {
    throw UnsupportedVariant("attention dump needs a dynamic fusion model, got " +
                             std::string(variant_name(model.variant())));
  }
  FusedStepModel<T> step(model, source);
  return attention_records(model, beam_decode(step, search));
}

std::string format_weight(double w) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1e", w);
  std::string s(buf);
  const auto e = s.find('e');
  if (e == std::string::npos) return s;
  std::string mant = s.substr(0, e);
  int exp = std::stoi(s.substr(e + 1));
  if (exp == 0) return mant;
  return mant + "e" + std::to_string(exp);
}

std::string format_attention(const std::vector<AttentionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += std::to_string(r.position) + "\t" + r.token + "\t";
    for (std::size_t i = 0; i < r.top.size(); ++i) {
      if (i) out += ",";
      out += r.top[i].first + ":" + format_weight(r.top[i].second);
    }
    out += "\n";
  }
  return out;
}

template <typename T>
FrobeniusSplit frobenius_decomposition(const Tensor<T>& W) {
  if (W.rank() != 2) throw ShapeError("frobenius_decomposition: expected a matrix, got " + shape_str(W.shape()));
  if (W.dim(0) % 2 != 0) {
    throw ShapeError("frobenius_decomposition: row count " + std::to_string(W.dim(0)) + " is odd");
  }
  const std::size_t h = W.dim(0) / 2, cols = W.dim(1);
  double tm = 0.0, lm = 0.0;
  for (std::size_t r = 0; r < 2 * h; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = static_cast<double>(W.at(r, c));
      (r < h ? tm : lm) += v * v;
    }
  }
  FrobeniusSplit out{std::sqrt(tm), std::sqrt(lm), 0.0};
  out.ratio = out.norm_lm == 0.0 ? std::numeric_limits<double>::infinity() : out.norm_tm / out.norm_lm;
  return out;
}

#define FUSEMT_INSTANTIATE_EVAL(T)                                                                                  \
  template std::vector<AttentionRecord> attention_records<T>(const FusedModel<T>&,                                  \
                                                             const Hypothesis<typename FusedStepModel<T>::State>&); \
  template std::vector<AttentionRecord> dump_attention<T>(const FusedModel<T>&, std::span<const int>,               \
                                                          const SearchOptions&);                                    \
  template FrobeniusSplit frobenius_decomposition<T>(const Tensor<T>&);

FUSEMT_INSTANTIATE_EVAL(float)
FUSEMT_INSTANTIATE_EVAL(double)

#undef FUSEMT_INSTANTIATE_EVAL

}  // namespace fusemt
