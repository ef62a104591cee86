#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "melo/ids.hpp"

namespace melo {

struct ScoredOutcome {
  double score{0.5};
  bool label{false};
};

// Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 * P(tie). Tied scores share
// their average rank. Returns nullopt when either class is empty.
inline std::optional<double> auc(std::span<const ScoredOutcome> preds) {
  std::vector<std::uint32_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return preds[a].score < preds[b].score; });

  std::uint64_t n_pos = 0;
  for (const auto& p : preds) n_pos += p.label ? 1 : 0;
  const std::uint64_t n_neg = preds.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  // Work in doubled ranks so tie averages stay integral.
  std::uint64_t rank_sum_x2 = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && preds[order[j]].score == preds[order[i]].score) ++j;
    const std::uint64_t avg_rank_x2 = (i + 1) + j;  // ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (preds[order[k]].label) rank_sum_x2 += avg_rank_x2;
    i = j;
  }
  const double u = static_cast<double>(rank_sum_x2 - n_pos * (n_pos + 1)) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline double rmse(std::span<const ScoredOutcome> preds) {
  if (preds.empty()) throw DomainError("rmse: empty prediction set");
  double s = 0.0;
  for (const auto& p : preds) {
    const double e = p.score - (p.label ? 1.0 : 0.0);
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(preds.size()));
}

// A score exactly at the threshold predicts a correct answer.
inline double accuracy(std::span<const ScoredOutcome> preds, double threshold = 0.5) {
  if (preds.empty()) throw DomainError("accuracy: empty prediction set");
  std::size_t hits = 0;
  for (const auto& p : preds) hits += ((p.score >= threshold) == p.label) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

struct Metrics {
  std::optional<double> auc;
  double rmse{0.0};
  double acc{0.0};
  std::size_t count{0};
};

inline Metrics score_all(std::span<const ScoredOutcome> preds, double threshold = 0.5) {
  return Metrics{melo::auc(preds), rmse(preds), accuracy(preds, threshold), preds.size()};
}

}  // namespace melo
