#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "melo/core.hpp"

namespace melo::rec {

struct Request {
  StudentId student;
  // Restrict candidates to items tagged with at least one of these concepts.
  std::optional<std::set<ConceptId>> concept_filter;
  std::uint32_t k{5};
  // Success probability the recommended items should sit near.
  double target{0.65};
  bool exclude_attempted{true};
  double gap_weight{0.5};
  double difficulty_weight{0.5};

  void validate() const {
    if (k < 1) throw ConfigError("recommendation count k must be >= 1");
    if (!(target > 0.0 && target < 1.0)) throw ConfigError("target probability must lie in (0,1)");
    if (!(gap_weight >= 0.0) || !(difficulty_weight >= 0.0)) throw ConfigError("score weights must be >= 0");
  }
};

struct ScoredItem {
  ItemId item;
  double gap{0.0};
  double match{0.0};
  double combined{0.0};
  double probability{0.5};
  std::uint64_t attempts{0};
};

struct Result {
  std::vector<ScoredItem> items;
  std::string status{"ok"};
};

// Distance of each concept rating below the learner's best concept, scaled by
// the learner's rating range to [0,1]. A flat profile yields 0.5 everywhere.
inline std::map<ConceptId, double> concept_gaps(const LearnerState& learner, std::size_t concept_count,
                                                double init_rating = 0.0) {
  if (concept_count == 0) throw DomainError("concept_gaps: empty domain");
  std::vector<double> r(concept_count);
  for (std::uint32_t l = 0; l < concept_count; ++l) r[l] = learner.concept_rating(ConceptId{l}, init_rating).value;
  const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
  const double range = *hi - *lo;
  std::map<ConceptId, double> gaps;
  for (std::uint32_t l = 0; l < concept_count; ++l) gaps[ConceptId{l}] = range > 0.0 ? (*hi - r[l]) / range : 0.5;
  return gaps;
}

// 1 when the predicted probability hits the target, 0 at the farthest
// possible probability.
inline double difficulty_match(double probability, double target) {
  return 1.0 - std::abs(probability - target) / std::max(target, 1.0 - target);
}

// Ranks the model's items for one learner by
//   gap_weight * (mean gap over the item's concepts) + difficulty_weight * match
// with ties going to fewer item attempts, then the lexicographically smaller
// item id.
inline Result recommend(const Request& req, const Model& model, const std::set<ItemId>& attempted = {}) {
  req.validate();
  if (model.config.variant != Variant::MElo) throw ConfigError("recommendations need per-concept ratings (melo variant)");
  const auto learner = model.learner_or_init(req.student);
  const auto gaps = concept_gaps(learner, model.concepts.size(), model.config.init_rating);

  std::vector<ScoredItem> scored;
  for (std::uint32_t i = 0; i < model.item_states.size(); ++i) {
    const ItemId id{i};
    const auto& item = model.item_states[i];
    if (item.concepts.empty()) continue;
    if (req.exclude_attempted && attempted.count(id)) continue;
    if (req.concept_filter &&
        std::none_of(item.concepts.begin(), item.concepts.end(),
                     [&](ConceptId c) { return req.concept_filter->count(c) > 0; }))
      continue;
    ScoredItem s;
    s.item = id;
    for (auto c : item.concepts) s.gap += gaps.at(c) * item.weight();
    s.probability = predict_melo(learner, item, model.config);
    s.match = difficulty_match(s.probability, req.target);
    s.combined = req.gap_weight * s.gap + req.difficulty_weight * s.match;
    s.attempts = item.attempts;
    scored.push_back(s);
  }
  if (scored.empty()) return Result{{}, "no candidate items"};

  std::sort(scored.begin(), scored.end(), [&](const ScoredItem& a, const ScoredItem& b) {
    if (a.combined != b.combined) return a.combined > b.combined;
    if (a.attempts != b.attempts) return a.attempts < b.attempts;
    return model.items.name(a.item) < model.items.name(b.item);
  });
  if (scored.size() > req.k) scored.resize(req.k);
  return Result{std::move(scored), "ok"};
}

}  // namespace melo::rec
