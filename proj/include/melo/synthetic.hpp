#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "melo/core.hpp"
#include "melo/rng.hpp"

namespace melo::synthetic {

struct NormalParams {
  double mean{0.0};
  double sd{1.0};
};

struct CohortSpec {
  std::uint32_t students{100};
  std::uint32_t items{1000};
  std::uint64_t answers{70000};
  std::uint32_t concepts{10};
  double sigma{0.5};
  std::pair<std::uint32_t, std::uint32_t> tag_range{1, 3};
  std::pair<double, double> mean_range{-1.0, 1.0};
  NormalParams difficulty{0.0, 1.0};
  NormalParams discrimination{1.0, 0.3};
  // Discrimination draws below this value are clipped up to it.
  double min_discrimination{0.1};
  std::uint64_t seed{1};

  void validate() const {
    if (students < 1 || items < 1 || answers < 1 || concepts < 1)
      throw ConfigError("cohort: students, items, answers and concepts must be >= 1");
    if (tag_range.first < 1 || tag_range.first > tag_range.second)
      throw ConfigError("cohort: tag range must satisfy 1 <= min <= max");
    if (tag_range.second > concepts) throw ConfigError("cohort: tag range maximum exceeds the number of concepts");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("cohort: sigma must be >= 0");
    if (!(mean_range.first <= mean_range.second)) throw ConfigError("cohort: mean range is inverted");
    if (!(min_discrimination > 0.0)) throw ConfigError("cohort: discrimination floor must be positive");
    if (difficulty.sd < 0.0 || discrimination.sd < 0.0) throw ConfigError("cohort: negative standard deviation");
  }
};

struct TrueItem {
  std::vector<std::uint32_t> concepts;  // sorted
  double difficulty{0.0};
  double discrimination{1.0};

  friend bool operator==(const TrueItem&, const TrueItem&) = default;
};

struct GroundTruth {
  std::uint32_t concept_count{0};
  // knowledge[n][l]
  std::vector<std::vector<double>> knowledge;
  std::vector<double> student_means;
  std::vector<TrueItem> items;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

inline GroundTruth generate_cohort(const CohortSpec& spec) {
  spec.validate();
  Rng rng(Rng::derive(spec.seed, 0));
  GroundTruth truth;
  truth.concept_count = spec.concepts;
  truth.knowledge.resize(spec.students);
  truth.student_means.resize(spec.students);
  for (std::uint32_t n = 0; n < spec.students; ++n) {
    const double mu = rng.uniform(spec.mean_range.first, spec.mean_range.second);
    truth.student_means[n] = mu;
    auto& row = truth.knowledge[n];
    row.resize(spec.concepts);
    for (auto& v : row) v = spec.sigma == 0.0 ? mu : rng.normal(mu, spec.sigma);
  }

  std::vector<std::uint32_t> pool(spec.concepts);
  truth.items.resize(spec.items);
  for (auto& item : truth.items) {
    const auto g = static_cast<std::uint32_t>(rng.between(spec.tag_range.first, spec.tag_range.second));
    // Partial Fisher-Yates: the first g slots become a uniform sample.
    std::iota(pool.begin(), pool.end(), 0u);
    for (std::uint32_t i = 0; i < g; ++i) {
      const auto j = i + static_cast<std::uint32_t>(rng.below(spec.concepts - i));
      std::swap(pool[i], pool[j]);
    }
    item.concepts.assign(pool.begin(), pool.begin() + g);
    std::sort(item.concepts.begin(), item.concepts.end());
    item.difficulty = rng.normal(spec.difficulty.mean, spec.difficulty.sd);
    item.discrimination = std::max(spec.min_discrimination, rng.normal(spec.discrimination.mean, spec.discrimination.sd));
  }
  return truth;
}

// Mean true knowledge over the item's tagged concepts.
inline double mean_knowledge(const GroundTruth& truth, std::uint32_t student, std::uint32_t item) {
  const auto& it = truth.items.at(item);
  const auto& row = truth.knowledge.at(student);
  double s = 0.0;
  for (auto c : it.concepts) s += row.at(c);
  return s / static_cast<double>(it.concepts.size());
}

// Two-parameter logistic response probability.
inline double irt_response_prob(const GroundTruth& truth, std::uint32_t student, std::uint32_t item) {
  const auto& it = truth.items.at(item);
  const double theta = mean_knowledge(truth, student, item);
  return 1.0 / (1.0 + std::exp(-it.discrimination * (theta - it.difficulty)));
}

struct SampledAnswer {
  std::uint32_t student{0};
  std::uint32_t item{0};
  bool correct{false};
  std::uint64_t seq{0};

  friend bool operator==(const SampledAnswer&, const SampledAnswer&) = default;
};

// Draws (student, item) pairs uniformly with replacement, then the outcome
// from the 2PL probability. seq runs 1..count.
inline std::vector<SampledAnswer> sample_interactions(const GroundTruth& truth, std::uint64_t count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("sample_interactions: count must be >= 1");
  if (truth.knowledge.empty() || truth.items.empty()) throw ConfigError("sample_interactions: empty cohort");
  Rng rng(Rng::derive(seed, 1));
  std::vector<SampledAnswer> out;
  out.reserve(count);
  const auto n = truth.knowledge.size();
  const auto m = truth.items.size();
  for (std::uint64_t k = 0; k < count; ++k) {
    SampledAnswer a;
    a.student = static_cast<std::uint32_t>(rng.below(n));
    a.item = static_cast<std::uint32_t>(rng.below(m));
    a.correct = rng.bernoulli(irt_response_prob(truth, a.student, a.item));
    a.seq = k + 1;
    out.push_back(a);
  }
  return out;
}

inline std::string student_name(std::uint32_t n) { return "u" + std::to_string(n); }
inline std::string item_name(std::uint32_t m) { return "q" + std::to_string(m); }
inline std::string concept_name(std::uint32_t l) { return "c" + std::to_string(l); }

// A model whose registries mirror the cohort one-to-one (student n has
// StudentId n, and so on), ready for replay.
inline Model make_model(const GroundTruth& truth, const EngineConfig& cfg) {
  Model model(cfg);
  for (std::uint32_t l = 0; l < truth.concept_count; ++l) model.concepts.intern(concept_name(l));
  for (std::uint32_t n = 0; n < truth.knowledge.size(); ++n) model.add_student(student_name(n));
  for (std::uint32_t m = 0; m < truth.items.size(); ++m) {
    std::vector<ConceptId> tags;
    for (auto c : truth.items[m].concepts) tags.push_back(ConceptId{c});
    model.add_item(item_name(m), std::move(tags));
  }
  return model;
}

inline std::vector<Interaction> to_interactions(std::span<const SampledAnswer> answers) {
  std::vector<Interaction> out;
  out.reserve(answers.size());
  for (const auto& a : answers) out.push_back({StudentId{a.student}, ItemId{a.item}, a.correct, a.seq, {}});
  return out;
}

}  // namespace melo::synthetic
