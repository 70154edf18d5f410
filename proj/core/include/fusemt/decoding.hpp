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

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "fusemt/errors.hpp"
#include "fusemt/fusion.hpp"

namespace fusemt {

// A left-to-right scorer. A State is "ready to predict": log_probs(state)
// is the (cached) score vector for the next token and advance() commits a
// token, producing the next ready state.
template <class M>
concept StepModel = requires(const M& m, const typename M::State& s, int tok) {
  { m.start() } -> std::same_as<typename M::State>;
  { m.log_probs(s) } -> std::convertible_to<std::span<const double>>;
  { m.advance(s, tok) } -> std::same_as<typename M::State>;
  { m.eos() } -> std::convertible_to<int>;
};

template <class State>
struct Hypothesis {
  std::vector<int> tokens;  // eos excluded
  double score = 0.0;       // sum of per-step log-scores, eos included
  bool finished = false;    // ended with eos rather than at max_len
  // history[k] is the state from which tokens[k] was chosen.
  std::vector<std::shared_ptr<const State>> history;
};

struct SearchOptions {
  std::size_t beam = 1;
  std::size_t max_len = 100;
  // Compare completed hypotheses by score / (length + 1) instead of score.
  bool length_normalize = false;
};

namespace detail {

inline double ranked(double score, std::size_t len, bool normalize) {
  return normalize ? score / static_cast<double>(len + 1) : score;
}

}  // namespace detail

// Argmax at every step, lowest id on ties; stops at eos or after max_len
// tokens.
template <StepModel M>
Hypothesis<typename M::State> greedy_decode(const M& model, std::size_t max_len) {
  using State = typename M::State;
  if (max_len < 1) throw ContractError("greedy_decode: max_len must be >= 1");
  Hypothesis<State> hyp;
  auto state = std::make_shared<const State>(model.start());
  const int eos = model.eos();
  while (true) {
    std::span<const double> lp = model.log_probs(*state);
    int best = 0;
    for (std::size_t v = 1; v < lp.size(); ++v) {
      if (lp[v] > lp[static_cast<std::size_t>(best)]) best = static_cast<int>(v);
    }
    hyp.score += lp[static_cast<std::size_t>(best)];
    if (best == eos) {
      hyp.finished = true;
      break;
    }
    hyp.tokens.push_back(best);
    hyp.history.push_back(state);
    if (hyp.tokens.size() >= max_len) break;
    state = std::make_shared<const State>(model.advance(*state, best));
  }
  return hyp;
}

// Beam search over the model's log-scores. Candidates are ranked by score,
// then by parent position and token id, so results are deterministic.
// Search stops once the best completed hypothesis outscores every live one
// (scores only decrease as tokens are added). For beam > 1 the greedy
// hypothesis is also considered, so the result never scores below it.
template <StepModel M>
Hypothesis<typename M::State> beam_decode(const M& model, const SearchOptions& opts) {
  using State = typename M::State;
  using Hyp = Hypothesis<State>;
  if (opts.beam < 1) throw ContractError("beam_decode: beam must be >= 1");
  if (opts.max_len < 1) throw ContractError("beam_decode: max_len must be >= 1");
  const int eos = model.eos();
  const bool norm = opts.length_normalize;

  struct Live {
    Hyp hyp;
    std::shared_ptr<const State> state;
  };
  std::vector<Live> live;
  live.push_back(Live{Hyp{}, std::make_shared<const State>(model.start())});
  std::vector<Hyp> done;

  for (std::size_t step = 0; step < opts.max_len && !live.empty(); ++step) {
    std::vector<std::tuple<double, std::size_t, int>> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      std::span<const double> lp = model.log_probs(*live[i].state);
      for (std::size_t v = 0; v < lp.size(); ++v) cands.emplace_back(live[i].hyp.score + lp[v], i, static_cast<int>(v));
    }
    const std::size_t keep = std::min(opts.beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const auto& a, const auto& b) {
                        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
                        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
                        return std::get<2>(a) < std::get<2>(b);
                      });
    std::vector<Live> next;
    const bool last = step + 1 == opts.max_len;
    for (std::size_t c = 0; c < keep; ++c) {
      const auto [score, parent, tok] = cands[c];
      Hyp h = live[parent].hyp;
      h.score = score;
      if (tok == eos) {
        h.finished = true;
        done.push_back(std::move(h));
        continue;
      }
      h.tokens.push_back(tok);
      h.history.push_back(live[parent].state);
      if (last) {
        done.push_back(std::move(h));
      } else {
        next.push_back(Live{std::move(h), std::make_shared<const State>(model.advance(*live[parent].state, tok))});
      }
    }
    live = std::move(next);
    if (!norm && !done.empty() && !live.empty()) {
      double best_done = done.front().score, best_live = live.front().hyp.score;
      for (const auto& d : done) best_done = std::max(best_done, d.score);
      for (const auto& l : live) best_live = std::max(best_live, l.hyp.score);
      if (best_done >= best_live) break;
    }
  }
  for (auto& l : live) done.push_back(std::move(l.hyp));

  auto key = [&](const Hyp& h) { return detail::ranked(h.score, h.tokens.size(), norm); };
  std::size_t best = 0;
  for (std::size_t i = 1; i < done.size(); ++i) {
    if (key(done[i]) > key(done[best])) best = i;
  }
  Hyp result = std::move(done[best]);
  if (opts.beam > 1) {
    Hyp g = greedy_decode(model, opts.max_len);
    if (key(g) > key(result)) result = std::move(g);
  }
  return result;
}

// ---------------------------------------------------------------------------

// Scores with the final distribution of any trained variant.
template <typename T>
class FusedStepModel {
 public:
  struct State {
    std::vector<T> dec;
    std::optional<typename LmBridge<T>::State> lm;
    std::vector<double> log_probs;
    std::vector<T> attention;  // over source positions
    std::vector<T> alpha;      // word attention over V_LM (dynamic only)
  };

  FusedStepModel(const FusedModel<T>& model, std::span<const int> source);

  State start() const;
  State advance(const State& s, int token) const;
  std::span<const double> log_probs(const State& s) const { return s.log_probs; }
  int eos() const noexcept { return Vocabulary::kEos; }

 private:
  State compute(std::span<const T> dec, int prev, std::optional<typename LmBridge<T>::State> lm) const;

  const FusedModel<T>* model_;
  TmEncoding<T> enc_;
};

// Decode-time log-linear mix of a baseline TM and a frozen LM sharing its
// vocabulary: log P_TM + lambda * log P_LM.
template <typename T>
class ShallowStepModel {
 public:
  struct State {
    std::vector<T> dec;
    typename LmBridge<T>::State lm;
    std::vector<double> log_probs;
  };

  ShallowStepModel(const TranslationModel<T>& tm, std::shared_ptr<const LanguageModel<T>> lm, ShallowConfig cfg,
                   std::span<const int> source);

  State start() const;
  State advance(const State& s, int token) const;
  std::span<const double> log_probs(const State& s) const { return s.log_probs; }
  int eos() const noexcept { return Vocabulary::kEos; }

 private:
  State compute(std::span<const T> dec, int prev, typename LmBridge<T>::State lm) const;

  const TranslationModel<T>* tm_;
  LmBridge<T> bridge_;
  ShallowConfig cfg_;
  TmEncoding<T> enc_;
};

// log softmax in double precision.
template <typename T>
std::vector<double> log_softmax(std::span<const T> logits);

extern template class FusedStepModel<float>;
extern template class FusedStepModel<double>;
extern template class ShallowStepModel<float>;
extern template class ShallowStepModel<double>;

}  // namespace fusemt
