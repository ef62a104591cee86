#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "melo/core.hpp"
#include "melo/rng.hpp"

using namespace melo;

namespace {

// Reference values computed with 40-digit arbitrary-precision arithmetic.
constexpr double kSigma04 = 0.5986876601124520003690786594055078341947;
constexpr double kSigma08 = 0.6899744811276124426338740619484366552566;
constexpr double kMeloDeltaSmall = 0.08026246797750959992618426811889843316106;
constexpr double kMeloDeltaLarge = 0.1197375320224904000738157318811015668389;

EngineConfig constant(Variant v, double k = 0.4) {
  EngineConfig c;
  c.variant = v;
  c.sensitivity = ConstantK{k};
  return c;
}

ItemState item_on(std::vector<std::uint32_t> concepts, double d = 0.0) {
  ItemState it;
  it.difficulty = d;
  for (auto c : concepts) it.concepts.push_back(ConceptId{c});
  return it;
}

LearnerState learner_with(std::vector<std::pair<std::uint32_t, double>> ratings, double theta = 0.0) {
  LearnerState l;
  l.global.value = theta;
  for (auto [c, v] : ratings) l.concepts[ConceptId{c}] = Rating{v, 0};
  return l;
}

// Random learner/item pair over `concepts` concepts, item tagged with 1..3.
std::pair<LearnerState, ItemState> random_case(Rng& rng, std::uint32_t concepts = 5) {
  LearnerState l;
  l.global = {rng.uniform(-3, 3), rng.below(50)};
  for (std::uint32_t c = 0; c < concepts; ++c)
    if (rng.bernoulli(0.8)) l.concepts[ConceptId{c}] = {rng.uniform(-3, 3), rng.below(50)};
  ItemState it;
  it.difficulty = rng.uniform(-3, 3);
  it.attempts = rng.below(50);
  const auto g = static_cast<std::uint32_t>(rng.between(1, 3));
  while (it.concepts.size() < g) {
    ConceptId c{static_cast<std::uint32_t>(rng.below(concepts))};
    if (std::find(it.concepts.begin(), it.concepts.end(), c) == it.concepts.end()) it.concepts.push_back(c);
  }
  std::sort(it.concepts.begin(), it.concepts.end());
  return {l, it};
}

}  // namespace

TEST(Logistic, KnownValues) {
  EXPECT_DOUBLE_EQ(logistic(0.0), 0.5);
  EXPECT_NEAR(logistic(2.0), 1.0 - logistic(-2.0), 1e-15);
  EXPECT_NEAR(logistic(0.4), kSigma04, 1e-15);
}

TEST(Logistic, RejectsNonFinite) {
  EXPECT_THROW(logistic(std::numeric_limits<double>::quiet_NaN()), DomainError);
  EXPECT_THROW(logistic(std::numeric_limits<double>::infinity()), DomainError);
}

TEST(PredictStandard, Examples) {
  const auto cfg = constant(Variant::StandardElo);
  EXPECT_DOUBLE_EQ(predict_standard(learner_with({}), item_on({}), cfg), 0.5);
  EXPECT_NEAR(predict_standard(learner_with({}, 1.2), item_on({}, 0.4), cfg), kSigma08, 1e-15);
}

TEST(PredictStandard, GuessCorrection) {
  auto cfg = constant(Variant::StandardElo);
  cfg.guess_correction = true;
  auto it = item_on({});
  EXPECT_THROW(predict_standard(learner_with({}), it, cfg), ConfigError);
  it.options = 4;
  EXPECT_DOUBLE_EQ(predict_standard(learner_with({}), it, cfg), 0.625);
}

TEST(Uncertainty, Examples) {
  EXPECT_DOUBLE_EQ(uncertainty(0, 1.8, 0.05), 1.8);
  EXPECT_DOUBLE_EQ(uncertainty(20, 1.8, 0.05), 0.9);
  for (std::uint64_t n : {0u, 1u, 7u, 1000u}) EXPECT_DOUBLE_EQ(uncertainty(n, 0.4, 0.0), 0.4);
}

TEST(Uncertainty, PositiveAndNonIncreasing) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double g = rng.uniform(0.01, 5), b = rng.uniform(0, 2);
    const auto n = rng.below(10000);
    EXPECT_GT(uncertainty(n, g, b), 0.0);
    EXPECT_LE(uncertainty(n + 1, g, b), uncertainty(n, g, b));
  }
}

TEST(UpdateStandard, Examples) {
  const auto cfg = constant(Variant::StandardElo);
  {
    auto l = learner_with({});
    auto it = item_on({});
    const auto d = update_standard(l, it, true, cfg);
    EXPECT_DOUBLE_EQ(l.global.value, 0.2);
    EXPECT_DOUBLE_EQ(it.difficulty, -0.2);
    EXPECT_EQ(l.global.count, 1u);
    EXPECT_EQ(it.attempts, 1u);
    ASSERT_EQ(d.student_deltas.size(), 1u);
    EXPECT_FALSE(d.student_deltas[0].target);
    EXPECT_DOUBLE_EQ(d.student_deltas[0].delta, 0.2);
    EXPECT_DOUBLE_EQ(d.item_delta, -0.2);
  }
  {
    auto l = learner_with({});
    auto it = item_on({});
    update_standard(l, it, false, cfg);
    EXPECT_DOUBLE_EQ(l.global.value, -0.2);
    EXPECT_DOUBLE_EQ(it.difficulty, 0.2);
  }
}

TEST(UpdateStandard, UncertaintyUsesPriorCounts) {
  EngineConfig cfg;
  cfg.variant = Variant::StandardElo;
  auto l = learner_with({});
  l.global.count = 20;
  auto it = item_on({});
  const auto d = update_standard(l, it, true, cfg);
  EXPECT_DOUBLE_EQ(d.student_deltas[0].delta, 0.9 * 0.5);
  EXPECT_DOUBLE_EQ(d.item_delta, -1.8 * 0.5);
  EXPECT_EQ(l.global.count, 21u);
  EXPECT_EQ(it.attempts, 1u);
}

TEST(AverageCompetency, Examples) {
  EXPECT_DOUBLE_EQ(average_competency(learner_with({{0, 0.4}, {1, -0.4}}), item_on({0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(average_competency(learner_with({{0, 0.7}}), item_on({0})), 0.7);
  EXPECT_NEAR(average_competency(learner_with({{0, 0.3}, {1, 0.6}, {2, 0.9}}), item_on({0, 1, 2})), 0.6, 1e-15);
}

TEST(AverageCompetency, UntrackedConceptsUseInitRating) {
  EXPECT_DOUBLE_EQ(average_competency(learner_with({{0, 1.0}}), item_on({0, 1}), 0.5), 0.75);
}

TEST(AverageCompetency, UntaggedItemIsDomainError) {
  EXPECT_THROW(average_competency(learner_with({}), item_on({})), DomainError);
}

TEST(PredictMelo, Examples) {
  const auto cfg = constant(Variant::MElo);
  EXPECT_DOUBLE_EQ(predict_melo(learner_with({}), item_on({0}), cfg), 0.5);
  EXPECT_DOUBLE_EQ(predict_melo(learner_with({{0, 0.4}, {1, -0.4}}), item_on({0, 1}), cfg), 0.5);
  const auto l = learner_with({{3, 1.3}});
  const auto it = item_on({3}, -0.2);
  EXPECT_DOUBLE_EQ(predict_melo(l, it, cfg), concept_probability(l, it, ConceptId{3}, cfg));
  EXPECT_DOUBLE_EQ(predict_melo(l, it, cfg), logistic(1.5));
}

TEST(MeloAlpha, Examples) {
  const auto cfg = constant(Variant::MElo);
  EXPECT_DOUBLE_EQ(melo_alpha(learner_with({{0, 0.9}}), item_on({0}, 0.3), true, cfg), 1.0);
  EXPECT_DOUBLE_EQ(melo_alpha(learner_with({{0, 0.9}}), item_on({0}, 0.3), false, cfg), 1.0);
  // 0.5 / (|1 - 0.598687| + |1 - 0.401313|)
  EXPECT_NEAR(melo_alpha(learner_with({{0, 0.4}, {1, -0.4}}), item_on({0, 1}), true, cfg), 0.5, 1e-15);
}

TEST(MeloAlpha, EqualRatingsGiveOneOverG) {
  const auto cfg = constant(Variant::MElo);
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const double v = rng.uniform(-3, 3);
    const auto g = static_cast<std::uint32_t>(rng.between(1, 6));
    LearnerState l;
    ItemState it;
    it.difficulty = rng.uniform(-3, 3);
    for (std::uint32_t c = 0; c < g; ++c) {
      l.concepts[ConceptId{c}] = {v, 0};
      it.concepts.push_back(ConceptId{c});
    }
    EXPECT_NEAR(melo_alpha(l, it, rng.bernoulli(0.5), cfg), 1.0 / g, 1e-12);
  }
}

TEST(UpdateMelo, TwoConceptExample) {
  const auto cfg = constant(Variant::MElo);
  {
    auto l = learner_with({{0, 0.4}, {1, -0.4}});
    auto it = item_on({0, 1});
    const auto d = update_melo(l, it, true, cfg);
    EXPECT_NEAR(d.item_delta, -0.2, 1e-15);
    ASSERT_EQ(d.student_deltas.size(), 2u);
    EXPECT_EQ(d.student_deltas[0].target, ConceptId{0});
    EXPECT_NEAR(d.student_deltas[0].delta, kMeloDeltaSmall, 1e-15);
    EXPECT_NEAR(d.student_deltas[1].delta, kMeloDeltaLarge, 1e-15);
    EXPECT_NEAR(d.net(), 0.0, 1e-15);
    EXPECT_NEAR(l.concepts.at(ConceptId{0}).value, 0.4 + kMeloDeltaSmall, 1e-15);
    EXPECT_EQ(l.concepts.at(ConceptId{1}).count, 1u);
    EXPECT_EQ(it.attempts, 1u);
    EXPECT_EQ(l.global.count, 0u);
  }
  {
    auto l = learner_with({{0, 0.4}, {1, -0.4}});
    auto it = item_on({0, 1});
    const auto d = update_melo(l, it, false, cfg);
    EXPECT_NEAR(d.item_delta, 0.2, 1e-15);
    EXPECT_NEAR(d.student_deltas[0].delta, -kMeloDeltaLarge, 1e-15);
    EXPECT_NEAR(d.student_deltas[1].delta, -kMeloDeltaSmall, 1e-15);
  }
}

TEST(UpdateMelo, SingleConceptMatchesStandardElo) {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const double lambda = rng.uniform(-3, 3), d = rng.uniform(-3, 3);
    const bool a = rng.bernoulli(0.5);
    EngineConfig melo_cfg;
    melo_cfg.sensitivity = Uncertainty{rng.uniform(0.1, 3), rng.uniform(0, 1)};
    auto elo_cfg = melo_cfg;
    elo_cfg.variant = Variant::StandardElo;
    const auto n = rng.below(40), m = rng.below(40);

    LearnerState ml;
    ml.concepts[ConceptId{2}] = {lambda, n};
    ItemState mi = item_on({2}, d);
    mi.attempts = m;
    LearnerState el;
    el.global = {lambda, n};
    ItemState ei = mi;

    const auto dm = update_melo(ml, mi, a, melo_cfg);
    const auto de = update_standard(el, ei, a, elo_cfg);
    EXPECT_EQ(dm.item_delta, de.item_delta);
    EXPECT_EQ(dm.student_deltas[0].delta, de.student_deltas[0].delta);
    EXPECT_EQ(ml.concepts.at(ConceptId{2}), el.global);
    EXPECT_EQ(mi, ei);
  }
}

TEST(Properties, ZeroSumConstantK) {
  Rng rng(23);
  for (int i = 0; i < 2000; ++i) {
    auto [l, it] = random_case(rng);
    const bool a = rng.bernoulli(0.5);
    const double k = rng.uniform(0.01, 2);
    EXPECT_NEAR(compute_update(l, it, a, constant(Variant::StandardElo, k)).net(), 0.0, 1e-12);
    EXPECT_NEAR(compute_update(l, it, a, constant(Variant::MElo, k)).net(), 0.0, 1e-12);
  }
}

TEST(Properties, ZeroSumUncertaintyWithSharedCounts) {
  Rng rng(29);
  for (int i = 0; i < 1000; ++i) {
    auto [l, it] = random_case(rng);
    const auto n = rng.below(100);
    l.global.count = n;
    it.attempts = n;
    for (auto c : it.concepts) l.concepts[c] = {rng.uniform(-3, 3), n};
    EngineConfig cfg;
    cfg.sensitivity = Uncertainty{rng.uniform(0.1, 3), rng.uniform(0, 1)};
    const bool a = rng.bernoulli(0.5);
    EXPECT_NEAR(compute_update(l, it, a, cfg).net(), 0.0, 1e-12);
    cfg.variant = Variant::StandardElo;
    EXPECT_NEAR(compute_update(l, it, a, cfg).net(), 0.0, 1e-12);
  }
}

TEST(Properties, ProbabilityBounds) {
  Rng rng(31);
  for (int i = 0; i < 2000; ++i) {
    auto [l, it] = random_case(rng);
    for (auto v : {Variant::StandardElo, Variant::MElo}) {
      auto cfg = constant(v);
      const double p = predict(l, it, cfg);
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
      cfg.guess_correction = true;
      it.options = static_cast<int>(rng.between(2, 6));
      const double pg = predict(l, it, cfg);
      EXPECT_GT(pg, 1.0 / *it.options);
      EXPECT_LT(pg, 1.0);
    }
  }
}

TEST(Properties, Monotonicity) {
  Rng rng(37);
  for (int i = 0; i < 1000; ++i) {
    auto [l, it] = random_case(rng);
    const double step = rng.uniform(0.01, 1);
    const auto elo = constant(Variant::StandardElo), melo = constant(Variant::MElo);

    auto harder = it;
    harder.difficulty += step;
    EXPECT_LT(predict(l, harder, elo), predict(l, it, elo));
    EXPECT_LT(predict(l, harder, melo), predict(l, it, melo));

    auto stronger = l;
    stronger.global.value += step;
    EXPECT_GT(predict(stronger, it, elo), predict(l, it, elo));
    auto c = it.concepts.front();
    stronger.concepts[c] = {l.concept_rating(c, 0.0).value + step, 0};
    EXPECT_GT(predict(stronger, it, melo), predict(l, it, melo));
  }
}

TEST(Properties, OutcomeSignOfStudentDeltas) {
  Rng rng(41);
  for (int i = 0; i < 1000; ++i) {
    auto [l, it] = random_case(rng);
    EngineConfig cfg;
    for (auto v : {Variant::StandardElo, Variant::MElo}) {
      cfg.variant = v;
      for (const auto& d : compute_update(l, it, true, cfg).student_deltas) EXPECT_GE(d.delta, 0.0);
      for (const auto& d : compute_update(l, it, false, cfg).student_deltas) EXPECT_LE(d.delta, 0.0);
    }
  }
}

TEST(Properties, DeltasMatchAppliedChanges) {
  Rng rng(43);
  for (int i = 0; i < 500; ++i) {
    auto [l, it] = random_case(rng);
    EngineConfig cfg;
    const auto before_l = l;
    const auto before_it = it;
    const auto d = update(l, it, rng.bernoulli(0.5), cfg);
    EXPECT_EQ(it.difficulty, before_it.difficulty + d.item_delta);
    EXPECT_EQ(it.attempts, before_it.attempts + 1);
    ASSERT_EQ(d.student_deltas.size(), it.concepts.size());
    for (const auto& sd : d.student_deltas) {
      const auto prev = before_l.concept_rating(*sd.target, 0.0);
      EXPECT_EQ(l.concepts.at(*sd.target).value, prev.value + sd.delta);
      EXPECT_EQ(l.concepts.at(*sd.target).count, prev.count + 1);
    }
    EXPECT_EQ(l.global, before_l.global);
  }
}

TEST(EngineConfig, Validation) {
  EngineConfig c;
  EXPECT_NO_THROW(c.validate());
  c.sensitivity = ConstantK{0.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.sensitivity = Uncertainty{1.8, -0.1};
  EXPECT_THROW(c.validate(), ConfigError);
  c.sensitivity = Uncertainty{};
  c.init_rating = std::nan("");
  EXPECT_THROW(c.validate(), ConfigError);
}

namespace {

Model small_model(Variant v) {
  Model m(constant(v));
  for (int c = 0; c < 3; ++c) m.concepts.intern("c" + std::to_string(c));
  for (int s = 0; s < 4; ++s) m.add_student("s" + std::to_string(s));
  for (std::uint32_t i = 0; i < 6; ++i) {
    std::vector<ConceptId> tags{ConceptId{i % 3}};
    if (i % 2) tags.push_back(ConceptId{(i + 1) % 3});
    m.add_item("i" + std::to_string(i), tags);
  }
  return m;
}

std::vector<Interaction> random_stream(Rng& rng, std::size_t n, std::uint32_t students, std::uint32_t items) {
  std::vector<Interaction> out;
  for (std::size_t k = 0; k < n; ++k)
    out.push_back({StudentId{static_cast<std::uint32_t>(rng.below(students))},
                   ItemId{static_cast<std::uint32_t>(rng.below(items))}, rng.bernoulli(0.6), k + 1, {}});
  return out;
}

}  // namespace

TEST(Replay, EmptyStreamLeavesStateUnchanged) {
  auto m = small_model(Variant::MElo);
  const auto before = m;
  EXPECT_TRUE(replay({}, m).empty());
  EXPECT_TRUE(m.same_state(before));
}

TEST(Replay, SingleInteractionEqualsPredictPlusUpdate) {
  auto m = small_model(Variant::MElo);
  auto l = m.learners[1];
  auto it = m.item_states[3];
  const double p = predict(l, it, m.config);
  const auto d = update(l, it, true, m.config);
  const std::vector<Interaction> s{{StudentId{1}, ItemId{3}, true, 1, {}}};
  const auto steps = replay(s, m);
  ASSERT_EQ(steps.size(), 1u);
  EXPECT_EQ(steps[0].prediction, p);
  EXPECT_EQ(steps[0].delta, d);
  EXPECT_EQ(m.learners[1], l);
  EXPECT_EQ(m.item_states[3], it);
}

TEST(Replay, DeterministicAndOrderSensitive) {
  Rng rng(3);
  const auto stream = random_stream(rng, 100, 4, 6);
  auto a = small_model(Variant::StandardElo), b = a;
  replay(stream, a);
  replay(stream, b);
  EXPECT_TRUE(a.same_state(b));

  auto shuffled = stream;
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng.below(i + 1)]);
  for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i].seq = i + 1;
  auto c = small_model(Variant::StandardElo);
  replay(shuffled, c);
  bool any_theta_differs = false;
  for (std::size_t s = 0; s < a.learners.size(); ++s)
    any_theta_differs |= a.learners[s].global.value != c.learners[s].global.value;
  EXPECT_TRUE(any_theta_differs);
}

TEST(Replay, RejectsNonIncreasingSeqWithPosition) {
  auto m = small_model(Variant::MElo);
  const std::vector<Interaction> s{{StudentId{0}, ItemId{0}, true, 5, {}}, {StudentId{1}, ItemId{1}, true, 5, {}}};
  try {
    replay(s, m);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("position 1"), std::string::npos);
  }
}

TEST(Replay, UnknownIdsRegisterAtInitRating) {
  auto cfg = constant(Variant::StandardElo);
  cfg.init_rating = 0.0;
  Model m(cfg);
  const std::vector<Interaction> s{{StudentId{2}, ItemId{4}, true, 1, {}}};
  replay(s, m);
  ASSERT_EQ(m.learners.size(), 3u);
  ASSERT_EQ(m.item_states.size(), 5u);
  EXPECT_DOUBLE_EQ(m.learners[2].global.value, 0.2);
  EXPECT_EQ(m.learners[0].global, (Rating{0.0, 0}));
}

TEST(Replay, UntaggedItemUnderMeloReportsPosition) {
  Model m(constant(Variant::MElo));
  const std::vector<Interaction> s{{StudentId{0}, ItemId{0}, true, 1, {}}};
  EXPECT_THROW(replay(s, m), DomainError);
}

TEST(Registry, InternAndAdd) {
  Registry<StudentTag> r;
  const auto a = r.intern("alice");
  EXPECT_EQ(r.intern("alice"), a);
  EXPECT_THROW(r.add("alice"), DomainError);
  EXPECT_EQ(r.add("bob").value, 1u);
  EXPECT_EQ(r.name(a), "alice");
  EXPECT_THROW((void)r.at("carol"), NotFound);
}

TEST(MeloAlpha, SaturatedProbabilitiesGiveNoUpdate) {
  const auto cfg = constant(Variant::MElo);
  auto l = learner_with({{0, 60.0}, {1, 70.0}});
  auto it = item_on({0, 1});
  EXPECT_EQ(melo_alpha(l, it, true, cfg), 0.0);
  const auto d = update_melo(l, it, true, cfg);
  EXPECT_EQ(d.net(), 0.0);
}
