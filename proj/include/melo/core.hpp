#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "melo/ids.hpp"

namespace melo {

enum class Variant { StandardElo, MElo };

// Fixed sensitivity K for every update.
struct ConstantK {
  double k{0.4};
};

// Sensitivity decays with the number of prior updates n: gamma / (1 + beta * n).
struct Uncertainty {
  double gamma{1.8};
  double beta{0.05};
};

using Sensitivity = std::variant<Uncertainty, ConstantK>;

struct EngineConfig {
  Variant variant{Variant::MElo};
  Sensitivity sensitivity{Uncertainty{}};
  bool guess_correction{false};
  double init_rating{0.0};

  void validate() const {
    if (const auto* c = std::get_if<ConstantK>(&sensitivity)) {
      if (!(c->k > 0.0) || !std::isfinite(c->k)) throw ConfigError("K must be a positive finite number");
    } else {
      const auto& u = std::get<Uncertainty>(sensitivity);
      if (!(u.gamma > 0.0) || !std::isfinite(u.gamma)) throw ConfigError("gamma must be positive");
      if (!(u.beta >= 0.0) || !std::isfinite(u.beta)) throw ConfigError("beta must be non-negative");
    }
    if (!std::isfinite(init_rating)) throw ConfigError("init_rating must be finite");
  }
};

inline const char* to_string(Variant v) { return v == Variant::MElo ? "melo" : "elo"; }

inline Variant parse_variant(std::string_view s) {
  if (s == "melo" || s == "m-elo" || s == "M_ELO") return Variant::MElo;
  if (s == "elo" || s == "standard" || s == "STANDARD_ELO") return Variant::StandardElo;
  throw ConfigError("unknown variant: " + std::string(s));
}

struct Rating {
  double value{0.0};
  std::uint64_t count{0};

  friend bool operator==(const Rating&, const Rating&) = default;
};

struct ItemState {
  double difficulty{0.0};
  std::uint64_t attempts{0};
  // Tagged concepts, each with implicit weight 1/g. Sorted, no duplicates.
  std::vector<ConceptId> concepts;
  // Number of answer options for guess correction; absent disables it.
  std::optional<int> options;

  [[nodiscard]] double weight() const { return 1.0 / static_cast<double>(concepts.size()); }

  friend bool operator==(const ItemState&, const ItemState&) = default;
};

struct LearnerState {
  Rating global;
  // Concepts missing from the map sit at the initial rating with count 0.
  std::map<ConceptId, Rating> concepts;

  [[nodiscard]] Rating concept_rating(ConceptId c, double init_rating) const {
    auto it = concepts.find(c);
    return it == concepts.end() ? Rating{init_rating, 0} : it->second;
  }

  friend bool operator==(const LearnerState&, const LearnerState&) = default;
};

struct StudentDelta {
  std::optional<ConceptId> target;  // concept rating; nullopt is the global rating
  double delta{0.0};

  friend bool operator==(const StudentDelta&, const StudentDelta&) = default;
};

struct UpdateDelta {
  double item_delta{0.0};
  std::vector<StudentDelta> student_deltas;
  double probability{0.5};

  [[nodiscard]] double net() const {
    double s = item_delta;
    for (const auto& d : student_deltas) s += d.delta;
    return s;
  }

  friend bool operator==(const UpdateDelta&, const UpdateDelta&) = default;
};

inline double logistic(double x) {
  if (!std::isfinite(x)) throw DomainError("logistic: non-finite input");
  return 1.0 / (1.0 + std::exp(-x));
}

inline double uncertainty(std::uint64_t n, double gamma, double beta) {
  return gamma / (1.0 + beta * static_cast<double>(n));
}

// Sensitivity for a parameter that has already received `prior_updates` updates.
inline double sensitivity(const EngineConfig& cfg, std::uint64_t prior_updates) {
  if (const auto* c = std::get_if<ConstantK>(&cfg.sensitivity)) return c->k;
  const auto& u = std::get<Uncertainty>(cfg.sensitivity);
  return uncertainty(prior_updates, u.gamma, u.beta);
}

namespace detail {

inline double apply_guess(double p, const ItemState& item, const EngineConfig& cfg) {
  if (!cfg.guess_correction) return p;
  if (!item.options) throw ConfigError("guess correction enabled but item has no option count");
  if (*item.options < 2) throw ConfigError("item option count must be at least 2");
  const double floor = 1.0 / static_cast<double>(*item.options);
  return floor + (1.0 - floor) * p;
}

inline void require_tags(const ItemState& item) {
  if (item.concepts.empty()) throw DomainError("item is not tagged with any concept");
}

}  // namespace detail

inline double predict_standard(const LearnerState& learner, const ItemState& item, const EngineConfig& cfg) {
  return detail::apply_guess(logistic(learner.global.value - item.difficulty), item, cfg);
}

// Weighted mean of the learner's ratings over the item's tagged concepts.
inline double average_competency(const LearnerState& learner, const ItemState& item, double init_rating = 0.0) {
  detail::require_tags(item);
  double sum = 0.0;
  const double w = item.weight();
  for (ConceptId c : item.concepts) sum += learner.concept_rating(c, init_rating).value * w;
  return sum;
}

inline double predict_melo(const LearnerState& learner, const ItemState& item, const EngineConfig& cfg) {
  return detail::apply_guess(logistic(average_competency(learner, item, cfg.init_rating) - item.difficulty), item,
                             cfg);
}

inline double predict(const LearnerState& learner, const ItemState& item, const EngineConfig& cfg) {
  return cfg.variant == Variant::MElo ? predict_melo(learner, item, cfg) : predict_standard(learner, item, cfg);
}

// Success probability judged from a single concept rating.
inline double concept_probability(const LearnerState& learner, const ItemState& item, ConceptId c,
                                  const EngineConfig& cfg) {
  return detail::apply_guess(logistic(learner.concept_rating(c, cfg.init_rating).value - item.difficulty), item, cfg);
}

// Normalisation that makes the per-concept student updates sum to the
// negated item update:
//   alpha = |a - P_avg| / sum_l |a - P_l|
// over the tagged concepts. Since a is 0 or 1 and every P lies in (0,1), all
// (a - P) terms share a sign, so the sum of alpha*K*(a - P_l) is K*(a - P_avg).
inline double melo_alpha(const LearnerState& learner, const ItemState& item, bool correct, const EngineConfig& cfg) {
  detail::require_tags(item);
  const double a = correct ? 1.0 : 0.0;
  const double p_avg = predict_melo(learner, item, cfg);
  double denom = 0.0;
  for (ConceptId c : item.concepts) denom += std::abs(a - concept_probability(learner, item, c, cfg));
  // Every concept probability already equals the outcome in double precision;
  // P_avg then does too, so there is nothing to distribute.
  if (denom == 0.0) return 0.0;
  return std::abs(a - p_avg) / denom;
}

inline UpdateDelta compute_update_standard(const LearnerState& learner, const ItemState& item, bool correct,
                                           const EngineConfig& cfg) {
  const double a = correct ? 1.0 : 0.0;
  const double p = predict_standard(learner, item, cfg);
  UpdateDelta out;
  out.probability = p;
  out.item_delta = sensitivity(cfg, item.attempts) * (p - a);
  out.student_deltas.push_back({std::nullopt, sensitivity(cfg, learner.global.count) * (a - p)});
  return out;
}

inline UpdateDelta compute_update_melo(const LearnerState& learner, const ItemState& item, bool correct,
                                       const EngineConfig& cfg) {
  const double a = correct ? 1.0 : 0.0;
  const double p_avg = predict_melo(learner, item, cfg);
  const double alpha = melo_alpha(learner, item, correct, cfg);
  UpdateDelta out;
  out.probability = p_avg;
  out.item_delta = sensitivity(cfg, item.attempts) * (p_avg - a);
  out.student_deltas.reserve(item.concepts.size());
  for (ConceptId c : item.concepts) {
    const double k = sensitivity(cfg, learner.concept_rating(c, cfg.init_rating).count);
    out.student_deltas.push_back({c, alpha * k * (a - concept_probability(learner, item, c, cfg))});
  }
  return out;
}

inline UpdateDelta compute_update(const LearnerState& learner, const ItemState& item, bool correct,
                                  const EngineConfig& cfg) {
  return cfg.variant == Variant::MElo ? compute_update_melo(learner, item, correct, cfg)
                                      : compute_update_standard(learner, item, correct, cfg);
}

// Applies a delta produced by compute_update and bumps every touched counter.
inline void apply_update(LearnerState& learner, ItemState& item, const UpdateDelta& delta, double init_rating) {
  item.difficulty += delta.item_delta;
  ++item.attempts;
  for (const auto& d : delta.student_deltas) {
    Rating* r = &learner.global;
    if (d.target) r = &learner.concepts.try_emplace(*d.target, Rating{init_rating, 0}).first->second;
    r->value += d.delta;
    ++r->count;
  }
}

inline UpdateDelta update_standard(LearnerState& learner, ItemState& item, bool correct, const EngineConfig& cfg) {
  auto d = compute_update_standard(learner, item, correct, cfg);
  apply_update(learner, item, d, cfg.init_rating);
  return d;
}

inline UpdateDelta update_melo(LearnerState& learner, ItemState& item, bool correct, const EngineConfig& cfg) {
  auto d = compute_update_melo(learner, item, correct, cfg);
  apply_update(learner, item, d, cfg.init_rating);
  return d;
}

inline UpdateDelta update(LearnerState& learner, ItemState& item, bool correct, const EngineConfig& cfg) {
  auto d = compute_update(learner, item, correct, cfg);
  apply_update(learner, item, d, cfg.init_rating);
  return d;
}

struct Interaction {
  StudentId student;
  ItemId item;
  bool correct{false};
  std::uint64_t seq{0};
  std::string timestamp;  // informational only

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// All rating state for one course: registries plus dense learner/item tables.
struct Model {
  EngineConfig config;
  Registry<ConceptTag> concepts;
  Registry<StudentTag> students;
  Registry<ItemTag> items;
  std::vector<LearnerState> learners;
  std::vector<ItemState> item_states;

  Model() = default;
  explicit Model(EngineConfig cfg) : config(cfg) {}

  StudentId add_student(std::string_view name) {
    auto id = students.intern(name);
    ensure_student(id);
    return id;
  }

  // Registers (or re-tags) an item. Concept names are interned.
  ItemId add_item(std::string_view name, std::span<const std::string> concept_names,
                  std::optional<int> options = std::nullopt) {
    std::vector<ConceptId> tags;
    tags.reserve(concept_names.size());
    for (const auto& c : concept_names) tags.push_back(concepts.intern(c));
    return add_item(name, std::move(tags), options);
  }

  ItemId add_item(std::string_view name, std::vector<ConceptId> tags, std::optional<int> options = std::nullopt) {
    std::sort(tags.begin(), tags.end());
    tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
    auto id = items.intern(name);
    ensure_item(id);
    auto& it = item_states[id.value];
    it.concepts = std::move(tags);
    it.options = options;
    return id;
  }

  void ensure_student(StudentId id) {
    while (learners.size() <= id.value) learners.push_back(LearnerState{Rating{config.init_rating, 0}, {}});
  }

  void ensure_item(ItemId id) {
    while (item_states.size() <= id.value) item_states.push_back(ItemState{config.init_rating, 0, {}, std::nullopt});
  }

  [[nodiscard]] double predict(StudentId s, ItemId i) const {
    return melo::predict(learner_or_init(s), item_or_init(i), config);
  }

  [[nodiscard]] LearnerState learner_or_init(StudentId s) const {
    return s.value < learners.size() ? learners[s.value] : LearnerState{Rating{config.init_rating, 0}, {}};
  }

  [[nodiscard]] ItemState item_or_init(ItemId i) const {
    return i.value < item_states.size() ? item_states[i.value] : ItemState{config.init_rating, 0, {}, std::nullopt};
  }

  // Rating values and counters only; registries are compared separately.
  [[nodiscard]] bool same_state(const Model& o) const {
    return learners == o.learners && item_states == o.item_states;
  }
};

struct ReplayStep {
  double prediction{0.5};
  UpdateDelta delta;
};

// Predict-then-update over an ordered stream. Unknown student/item handles are
// registered at the initial rating; records whose seq does not increase are
// rejected with their position.
inline std::vector<ReplayStep> replay(std::span<const Interaction> stream, Model& model) {
  model.config.validate();
  std::vector<ReplayStep> steps;
  steps.reserve(stream.size());
  std::optional<std::uint64_t> last_seq;
  for (std::size_t pos = 0; pos < stream.size(); ++pos) {
    const auto& x = stream[pos];
    if (last_seq && x.seq <= *last_seq)
      throw ParseError("replay: seq not strictly increasing at position " + std::to_string(pos));
    last_seq = x.seq;
    model.ensure_student(x.student);
    model.ensure_item(x.item);
    auto& learner = model.learners[x.student.value];
    auto& item = model.item_states[x.item.value];
    try {
      auto d = update(learner, item, x.correct, model.config);
      steps.push_back({d.probability, std::move(d)});
    } catch (const Error& e) {
      throw DomainError("replay: record at position " + std::to_string(pos) + ": " + e.what());
    }
  }
  return steps;
}

}  // namespace melo
