#include <gtest/gtest.h>

#include <cmath>

#include "melo/recommender.hpp"
#include "melo/rng.hpp"

using namespace melo;
using namespace melo::rec;

namespace {

// Learner s0 with ratings c0=1, c1=0, c2=-1 (gaps 0, 0.5, 1).
Model fixture() {
  EngineConfig cfg;
  cfg.sensitivity = ConstantK{0.4};
  Model m(cfg);
  for (auto c : {"c0", "c1", "c2"}) m.concepts.intern(c);
  const auto s = m.add_student("s0");
  m.learners[s.value].concepts = {{ConceptId{0}, {1.0, 3}}, {ConceptId{1}, {0.0, 3}}, {ConceptId{2}, {-1.0, 3}}};
  const std::vector<std::tuple<const char*, std::vector<std::uint32_t>, double>> items{
      {"A", {0}, 0.0}, {"B", {2}, -1.6}, {"C", {2}, 2.0}, {"D", {1, 2}, -1.119}, {"E", {1}, 0.0}, {"F", {0, 1}, 0.5}};
  for (const auto& [name, tags, d] : items) {
    std::vector<ConceptId> ids;
    for (auto t : tags) ids.push_back(ConceptId{t});
    const auto id = m.add_item(name, ids);
    m.item_states[id.value].difficulty = d;
  }
  return m;
}

std::vector<std::string> names(const Result& r, const Model& m) {
  std::vector<std::string> out;
  for (const auto& s : r.items) out.push_back(m.items.name(s.item));
  return out;
}

}  // namespace

TEST(Gaps, Examples) {
  LearnerState l;
  l.concepts = {{ConceptId{0}, {1.0, 1}}, {ConceptId{1}, {0.0, 1}}, {ConceptId{2}, {-1.0, 1}}};
  const auto g = concept_gaps(l, 3);
  EXPECT_EQ(g.at(ConceptId{0}), 0.0);
  EXPECT_EQ(g.at(ConceptId{1}), 0.5);
  EXPECT_EQ(g.at(ConceptId{2}), 1.0);
  for (const auto& [c, v] : concept_gaps(LearnerState{}, 4)) EXPECT_EQ(v, 0.5);
}

TEST(Gaps, LoweringARatingNeverShrinksItsGap) {
  Rng rng(19);
  for (int i = 0; i < 500; ++i) {
    LearnerState l;
    for (std::uint32_t c = 0; c < 5; ++c) l.concepts[ConceptId{c}] = {rng.uniform(-2, 2), 1};
    const ConceptId target{static_cast<std::uint32_t>(rng.below(5))};
    const auto before = concept_gaps(l, 5).at(target);
    l.concepts[target].value -= rng.uniform(0.01, 1);
    EXPECT_GE(concept_gaps(l, 5).at(target), before);
  }
}

TEST(Match, Examples) {
  EXPECT_EQ(difficulty_match(0.65, 0.65), 1.0);
  EXPECT_EQ(difficulty_match(0.0, 0.65), 0.0);
  EXPECT_NEAR(difficulty_match(0.5, 0.65), 1.0 - 0.15 / 0.65, 1e-15);
}

TEST(Recommend, HandComputedOrder) {
  const auto m = fixture();
  Request req;
  req.student = StudentId{0};
  req.k = 6;
  const auto r = recommend(req, m);
  EXPECT_EQ(r.status, "ok");
  EXPECT_EQ(names(r, m), (std::vector<std::string>{"B", "D", "E", "C", "F", "A"}));
  EXPECT_NEAR(r.items[0].combined, 0.9966586970967657, 1e-12);
  EXPECT_NEAR(r.items[0].probability, 0.6456563062257954, 1e-12);
  EXPECT_NEAR(r.items[1].combined, 0.8749931384885574, 1e-12);
  EXPECT_NEAR(r.items[3].combined, 0.5364814409058205, 1e-12);
  EXPECT_NEAR(r.items[5].combined, 0.43764724720768855, 1e-12);
}

TEST(Recommend, GapOnlyPutsWeakestConceptFirst) {
  const auto m = fixture();
  Request req;
  req.difficulty_weight = 0.0;
  req.k = 2;
  const auto r = recommend(req, m);
  ASSERT_EQ(r.items.size(), 2u);
  // B and C both sit on the weakest concept; C has the same attempts so the
  // name breaks the tie.
  EXPECT_EQ(names(r, m), (std::vector<std::string>{"B", "C"}));
}

TEST(Recommend, MatchOnlyPrefersTargetProbability) {
  EngineConfig cfg;
  Model m(cfg);
  m.concepts.intern("c");
  m.add_student("s");
  const double at_target = -std::log(0.65 / 0.35);
  for (auto [name, d] : {std::pair{"easy", -2.0}, std::pair{"hard", 1.0}, std::pair{"fit", at_target},
                         std::pair{"even", 0.0}}) {
    const auto id = m.add_item(name, std::vector<ConceptId>{ConceptId{0}});
    m.item_states[id.value].difficulty = d;
  }
  Request req;
  req.gap_weight = 0.0;
  const auto r = recommend(req, m);
  EXPECT_EQ(m.items.name(r.items.front().item), "fit");
  EXPECT_NEAR(r.items.front().probability, 0.65, 1e-12);
}

TEST(Recommend, TiesGoToFewerAttemptsThenName) {
  EngineConfig cfg;
  Model m(cfg);
  m.concepts.intern("c");
  m.add_student("s");
  for (auto n : {"z", "y", "x"}) m.add_item(n, std::vector<ConceptId>{ConceptId{0}});
  m.item_states[2].attempts = 4;  // x
  Request req;
  const auto r = recommend(req, m);
  EXPECT_EQ(names(r, m), (std::vector<std::string>{"y", "z", "x"}));
}

TEST(Recommend, ExcludesAttemptedAndFiltersConcepts) {
  const auto m = fixture();
  Request req;
  req.k = 10;
  const std::set<ItemId> attempted{ItemId{1}};  // B
  auto r = recommend(req, m, attempted);
  EXPECT_EQ(r.items.size(), 5u);
  for (const auto& s : r.items) EXPECT_NE(s.item, ItemId{1});

  req.exclude_attempted = false;
  EXPECT_EQ(recommend(req, m, attempted).items.size(), 6u);

  req.concept_filter = std::set<ConceptId>{ConceptId{0}};
  EXPECT_EQ(names(recommend(req, m), m), (std::vector<std::string>{"F", "A"}));
}

TEST(Recommend, EmptyCandidateSetAndErrors) {
  EngineConfig cfg;
  Model m(cfg);
  m.concepts.intern("c");
  m.add_student("s");
  Request req;
  EXPECT_EQ(recommend(req, m).status, "no candidate items");
  req.target = 1.0;
  EXPECT_THROW(recommend(req, m), ConfigError);
  cfg.variant = Variant::StandardElo;
  EXPECT_THROW(recommend(Request{}, Model(cfg)), ConfigError);
}
