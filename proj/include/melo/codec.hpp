#pragma once

// JSON encodings of the engine configuration, rating deltas and full model
// state. Doubles are written in shortest round-trip form, so a decoded model
// is bit-identical to the one encoded.
//
// Engine config schema:
//   {
//     "variant": "elo" | "melo",
//     "sensitivity": {"mode": "uncertainty", "gamma": 1.8, "beta": 0.05}
//                  | {"mode": "constant", "k": 0.4},
//     "guess_correction": false,
//     "init_rating": 0.0
//   }
// Every key is optional; unknown keys are rejected.

#include <json.hpp>

#include <set>
#include <string>

#include "melo/core.hpp"

namespace melo::codec {

using nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(std::string(where) + ": unknown key '" + it.key() + "'");
}

template <typename T>
T field(const json& j, const char* key, T fallback, std::string_view where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string(where) + ": '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline json to_json(const EngineConfig& cfg) {
  json s;
  if (const auto* c = std::get_if<ConstantK>(&cfg.sensitivity)) {
    s = {{"mode", "constant"}, {"k", c->k}};
  } else {
    const auto& u = std::get<Uncertainty>(cfg.sensitivity);
    s = {{"mode", "uncertainty"}, {"gamma", u.gamma}, {"beta", u.beta}};
  }
  return {{"variant", to_string(cfg.variant)},
          {"sensitivity", s},
          {"guess_correction", cfg.guess_correction},
          {"init_rating", cfg.init_rating}};
}

inline EngineConfig config_from_json(const json& j) {
  constexpr std::string_view where = "engine config";
  detail::reject_unknown(j, {"variant", "sensitivity", "guess_correction", "init_rating"}, where);
  EngineConfig cfg;
  cfg.variant = parse_variant(detail::field<std::string>(j, "variant", "melo", where));
  if (j.contains("sensitivity")) {
    const auto& s = j.at("sensitivity");
    detail::reject_unknown(s, {"mode", "k", "gamma", "beta"}, "engine config sensitivity");
    const auto mode = detail::field<std::string>(s, "mode", "uncertainty", where);
    if (mode == "constant") {
      if (s.contains("gamma") || s.contains("beta")) throw ConfigError("constant sensitivity takes only 'k'");
      cfg.sensitivity = ConstantK{detail::field<double>(s, "k", ConstantK{}.k, where)};
    } else if (mode == "uncertainty") {
      if (s.contains("k")) throw ConfigError("uncertainty sensitivity takes 'gamma' and 'beta', not 'k'");
      cfg.sensitivity = Uncertainty{detail::field<double>(s, "gamma", Uncertainty{}.gamma, where),
                                    detail::field<double>(s, "beta", Uncertainty{}.beta, where)};
    } else {
      throw ConfigError("engine config: unknown sensitivity mode '" + mode + "'");
    }
  }
  cfg.guess_correction = detail::field<bool>(j, "guess_correction", false, where);
  cfg.init_rating = detail::field<double>(j, "init_rating", 0.0, where);
  cfg.validate();
  return cfg;
}

inline json to_json(const UpdateDelta& d, const Model& model) {
  json students = json::array();
  for (const auto& s : d.student_deltas) {
    students.push_back({{"concept", s.target ? json(model.concepts.name(*s.target)) : json(nullptr)},
                        {"delta", s.delta}});
  }
  return {{"item_delta", d.item_delta}, {"student_deltas", students}, {"probability", d.probability}};
}

inline json to_json(const Model& model) {
  json items = json::array();
  for (std::uint32_t i = 0; i < model.item_states.size(); ++i) {
    const auto& it = model.item_states[i];
    json tags = json::array();
    for (auto c : it.concepts) tags.push_back(model.concepts.name(c));
    items.push_back({{"id", model.items.name(ItemId{i})},
                     {"concepts", tags},
                     {"options", it.options ? json(*it.options) : json(nullptr)},
                     {"difficulty", it.difficulty},
                     {"attempts", it.attempts}});
  }
  json students = json::array();
  for (std::uint32_t s = 0; s < model.learners.size(); ++s) {
    const auto& l = model.learners[s];
    json concepts = json::object();
    for (const auto& [c, r] : l.concepts) concepts[model.concepts.name(c)] = {{"rating", r.value}, {"count", r.count}};
    students.push_back({{"id", model.students.name(StudentId{s})},
                        {"theta", l.global.value},
                        {"theta_count", l.global.count},
                        {"concepts", concepts}});
  }
  return {{"config", to_json(model.config)},
          {"concepts", model.concepts.names()},
          {"items", items},
          {"students", students}};
}

inline Model model_from_json(const json& j) {
  try {
    Model m(config_from_json(j.at("config")));
    for (const auto& c : j.at("concepts")) m.concepts.add(c.get<std::string>());
    for (const auto& it : j.at("items")) {
      std::vector<ConceptId> tags;
      for (const auto& c : it.at("concepts")) tags.push_back(m.concepts.at(c.get<std::string>()));
      std::optional<int> options;
      if (!it.at("options").is_null()) options = it.at("options").get<int>();
      const auto id = m.add_item(it.at("id").get<std::string>(), std::move(tags), options);
      auto& st = m.item_states[id.value];
      st.difficulty = it.at("difficulty").get<double>();
      st.attempts = it.at("attempts").get<std::uint64_t>();
    }
    for (const auto& s : j.at("students")) {
      const auto id = m.add_student(s.at("id").get<std::string>());
      auto& l = m.learners[id.value];
      l.global = {s.at("theta").get<double>(), s.at("theta_count").get<std::uint64_t>()};
      for (auto c = s.at("concepts").begin(); c != s.at("concepts").end(); ++c)
        l.concepts[m.concepts.at(c.key())] = {c->at("rating").get<double>(), c->at("count").get<std::uint64_t>()};
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model state: ") + e.what());
  } catch (const NotFound& e) {
    throw ParseError(std::string("model state: ") + e.what());
  }
}

}  // namespace melo::codec
