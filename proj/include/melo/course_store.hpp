#pragma once

// Event-sourced persistence for one course.
//
// <dir>/events.jsonl holds one JSON event per line, each carrying a gapless
// seq starting at 1:
//   {"seq":1,"type":"course","id":...,"concepts":[...],"config":{...}}
//   {"seq":n,"type":"student","id":...}
//   {"seq":n,"type":"item","id":...,"concepts":[...],"options":4|null,"answer_key":...|null}
//   {"seq":n,"type":"answer","student":...,"item":...,"correct":true,"idempotency_key":...|null}
// <dir>/snapshot.json is the materialized state as of some seq; on open the
// snapshot is loaded and only later events are re-applied. The event log is
// authoritative: deleting the snapshot must not change the recovered state.

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "melo/core.hpp"
#include "melo/codec.hpp"
#include "melo/recommender.hpp"

namespace melo::service {

using nlohmann::json;

struct Conflict : Error {
  using Error::Error;
};
struct InvalidRequest : Error {
  using Error::Error;
};

struct HistoryPoint {
  std::uint64_t seq{0};
  std::optional<ConceptId> target;  // nullopt is the global rating
  double rating{0.0};
};

struct StoreOptions {
  // Snapshot after this many events since the last one; 0 disables.
  std::uint64_t snapshot_every{1000};
  // Per-student rating-history ring size.
  std::size_t history_capacity{512};
  // Test hook, called at named points on the write path ("after_append",
  // "before_snapshot_rename"). Throwing from it simulates a crash there.
  std::function<void(std::string_view)> fault;
};

// Linear-interpolation percentile over sorted values.
inline double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::nan("");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline json summarize(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = v.empty() ? 0.0 : sum / static_cast<double>(v.size());
  return {{"n", v.size()},
          {"mean", mean},
          {"min", v.empty() ? json(nullptr) : json(v.front())},
          {"p25", v.empty() ? json(nullptr) : json(percentile(v, 0.25))},
          {"median", v.empty() ? json(nullptr) : json(percentile(v, 0.5))},
          {"p75", v.empty() ? json(nullptr) : json(percentile(v, 0.75))},
          {"max", v.empty() ? json(nullptr) : json(v.back())}};
}

class CourseStore {
 public:
  // Opens an existing course directory, recovering state from the snapshot and
  // event log.
  static std::unique_ptr<CourseStore> open(const std::filesystem::path& dir, StoreOptions opts = {}) {
    std::unique_ptr<CourseStore> s(new CourseStore(dir, std::move(opts)));
    s->recover();
    return s;
  }

  static std::unique_ptr<CourseStore> create(const std::filesystem::path& dir, const std::string& course_id,
                                             const std::vector<std::string>& concepts, const EngineConfig& cfg,
                                             StoreOptions opts = {}) {
    if (course_id.empty()) throw InvalidRequest("course id must not be empty");
    if (concepts.empty()) throw InvalidRequest("a course needs at least one concept");
    if (std::set<std::string>(concepts.begin(), concepts.end()).size() != concepts.size())
      throw InvalidRequest("duplicate concept in domain model");
    cfg.validate();
    if (std::filesystem::exists(dir / kEvents)) throw Conflict("course already exists: " + course_id);
    std::filesystem::create_directories(dir);
    std::unique_ptr<CourseStore> s(new CourseStore(dir, std::move(opts)));
    s->open_log();
    std::unique_lock lock(s->mu_);
    s->commit({{"type", "course"}, {"id", course_id}, {"concepts", concepts}, {"config", codec::to_json(cfg)}});
    return s;
  }

  json add_student(const std::string& id) {
    std::unique_lock lock(mu_);
    check_alive();
    if (id.empty()) throw InvalidRequest("student id must not be empty");
    if (model_.students.contains(id)) throw Conflict("student already registered: " + id);
    return commit({{"type", "student"}, {"id", id}});
  }

  json add_item(const std::string& id, const std::vector<std::string>& concepts, std::optional<int> options,
                std::optional<std::string> answer_key = std::nullopt) {
    std::unique_lock lock(mu_);
    check_alive();
    if (id.empty()) throw InvalidRequest("item id must not be empty");
    if (model_.items.contains(id)) throw Conflict("item already registered: " + id);
    if (concepts.empty()) throw InvalidRequest("item must be tagged with at least one concept");
    for (const auto& c : concepts)
      if (!model_.concepts.contains(c)) throw InvalidRequest("concept not in the course domain: " + c);
    if (options && *options < 2) throw InvalidRequest("options must be >= 2");
    if (model_.config.guess_correction && !options)
      throw InvalidRequest("guess correction is enabled; items need an option count");
    return commit({{"type", "item"},
                   {"id", id},
                   {"concepts", concepts},
                   {"options", options ? json(*options) : json(nullptr)},
                   {"answer_key", answer_key ? json(*answer_key) : json(nullptr)}});
  }

  // Appends the answer event, then applies it. A repeated idempotency key
  // returns the stored response without writing anything.
  json submit_answer(const std::string& student, const std::string& item, bool correct,
                     std::optional<std::string> idempotency_key = std::nullopt) {
    std::unique_lock lock(mu_);
    check_alive();
    if (idempotency_key) {
      if (auto it = idempotent_.find(*idempotency_key); it != idempotent_.end()) {
        const auto& req = it->at("request");
        if (req.at("student") != student || req.at("item") != item || req.at("correct") != correct)
          throw Conflict("idempotency key reused with a different request: " + *idempotency_key);
        return it->at("response");
      }
    }
    if (!model_.students.contains(student)) throw NotFound("unknown student: " + student);
    if (!model_.items.contains(item)) throw NotFound("unknown item: " + item);
    return commit({{"type", "answer"},
                   {"student", student},
                   {"item", item},
                   {"correct", correct},
                   {"idempotency_key", idempotency_key ? json(*idempotency_key) : json(nullptr)}});
  }

  json learner_model(const std::string& student) const {
    std::shared_lock lock(mu_);
    const auto sid = model_.students.at(student);
    const auto& l = model_.learners[sid.value];
    json concepts = json::array();
    for (std::uint32_t c = 0; c < model_.concepts.size(); ++c) {
      const auto r = l.concept_rating(ConceptId{c}, model_.config.init_rating);
      concepts.push_back({{"concept", model_.concepts.name(ConceptId{c})}, {"rating", r.value}, {"count", r.count}});
    }
    json history = json::array();
    if (auto it = history_.find(sid); it != history_.end()) {
      for (const auto& h : it->second) {
        history.push_back({{"seq", h.seq},
                           {"concept", h.target ? json(model_.concepts.name(*h.target)) : json(nullptr)},
                           {"rating", h.rating}});
      }
    }
    return {{"course", course_id_},
            {"student", student},
            {"watermark", seq_},
            {"theta", {{"rating", l.global.value}, {"count", l.global.count}}},
            {"concepts", concepts},
            {"history", history}};
  }

  json recommendations(const std::string& student, std::uint32_t k, std::optional<double> target = std::nullopt) const {
    std::shared_lock lock(mu_);
    rec::Request req;
    req.student = model_.students.at(student);
    req.k = k;
    if (target) req.target = *target;
    std::set<ItemId> attempted;
    if (auto it = attempted_.find(req.student); it != attempted_.end()) attempted = it->second;
    const auto res = rec::recommend(req, model_, attempted);
    json items = json::array();
    for (const auto& s : res.items) {
      items.push_back({{"item", model_.items.name(s.item)},
                       {"gap", s.gap},
                       {"match", s.match},
                       {"combined", s.combined},
                       {"probability", s.probability},
                       {"attempts", s.attempts}});
    }
    return {{"course", course_id_}, {"student", student}, {"watermark", seq_}, {"status", res.status}, {"items", items}};
  }

  json class_overview() const {
    std::shared_lock lock(mu_);
    json out{{"course", course_id_}, {"watermark", seq_}, {"students", model_.students.size()}};
    if (model_.students.size() == 0) {
      out["status"] = "empty course";
      out["concepts"] = json::array();
      out["ranking"] = json::array();
      out["items"] = summarize({});
      return out;
    }
    out["status"] = "ok";
    json concepts = json::array();
    std::vector<std::pair<double, std::string>> means;
    for (std::uint32_t c = 0; c < model_.concepts.size(); ++c) {
      std::vector<double> v;
      for (const auto& l : model_.learners) v.push_back(l.concept_rating(ConceptId{c}, model_.config.init_rating).value);
      auto s = summarize(v);
      const auto& name = model_.concepts.name(ConceptId{c});
      means.emplace_back(s.at("mean").get<double>(), name);
      s["concept"] = name;
      concepts.push_back(std::move(s));
    }
    // Best concept first.
    std::stable_sort(means.begin(), means.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    json ranking = json::array();
    for (const auto& m : means) ranking.push_back(m.second);
    std::vector<double> diffs;
    for (const auto& it : model_.item_states) diffs.push_back(it.difficulty);
    out["concepts"] = concepts;
    out["ranking"] = ranking;
    out["items"] = summarize(diffs);
    return out;
  }

  json item_stats(const std::string& item) const {
    std::shared_lock lock(mu_);
    const auto id = model_.items.at(item);
    const auto& st = model_.item_states[id.value];
    json tags = json::array();
    for (auto c : st.concepts) tags.push_back(model_.concepts.name(c));
    const auto correct = item_correct_[id.value];
    return {{"course", course_id_},
            {"item", item},
            {"watermark", seq_},
            {"concepts", tags},
            {"options", st.options ? json(*st.options) : json(nullptr)},
            {"difficulty", st.difficulty},
            {"attempts", st.attempts},
            {"correct", correct},
            {"correct_rate", st.attempts ? json(static_cast<double>(correct) / static_cast<double>(st.attempts))
                                         : json(nullptr)}};
  }

  // Writes a snapshot of the current state now.
  void snapshot() {
    std::unique_lock lock(mu_);
    check_alive();
    write_snapshot();
  }

  [[nodiscard]] std::uint64_t watermark() const {
    std::shared_lock lock(mu_);
    return seq_;
  }

  // Copy of the materialized model, consistent with watermark().
  [[nodiscard]] std::pair<Model, std::uint64_t> model_snapshot() const {
    std::shared_lock lock(mu_);
    return {model_, seq_};
  }

  [[nodiscard]] const std::string& course_id() const { return course_id_; }
  [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }

  static constexpr const char* kEvents = "events.jsonl";
  static constexpr const char* kSnapshot = "snapshot.json";

 private:
  CourseStore(std::filesystem::path dir, StoreOptions opts) : dir_(std::move(dir)), opts_(std::move(opts)) {}

  void check_alive() const {
    if (dead_) throw Error("course store is unusable after a failed write; reopen it");
  }

  void open_log() {
    log_.open(dir_ / kEvents, std::ios::app | std::ios::binary);
    if (!log_) throw Error("cannot open event log in " + dir_.string());
  }

  // Assigns the next seq, appends, then applies. Caller holds the write lock.
  json commit(json event) {
    event["seq"] = seq_ + 1;
    try {
      log_ << event.dump() << '\n';
      log_.flush();
      if (!log_) throw Error("event log write failed");
      if (opts_.fault) opts_.fault("after_append");
    } catch (...) {
      dead_ = true;
      throw;
    }
    json response;
    try {
      response = apply(event);
    } catch (...) {
      dead_ = true;
      throw;
    }
    if (opts_.snapshot_every && seq_ - snapshot_seq_ >= opts_.snapshot_every) {
      try {
        write_snapshot();
      } catch (...) {
        dead_ = true;
        throw;
      }
    }
    return response;
  }

  // The single state transition used for live writes and recovery alike.
  json apply(const json& ev) {
    const auto seq = ev.at("seq").get<std::uint64_t>();
    if (seq != seq_ + 1) throw ParseError("event log: expected seq " + std::to_string(seq_ + 1) + ", got " + std::to_string(seq));
    const auto type = ev.at("type").get<std::string>();
    json response;
    if (type == "course") {
      if (seq != 1) throw ParseError("event log: course event must come first");
      course_id_ = ev.at("id").get<std::string>();
      model_ = Model(codec::config_from_json(ev.at("config")));
      for (const auto& c : ev.at("concepts")) model_.concepts.add(c.get<std::string>());
      response = {{"course", course_id_}, {"seq", seq}};
    } else if (type == "student") {
      model_.add_student(ev.at("id").get<std::string>());
      response = {{"student", ev.at("id")}, {"seq", seq}};
    } else if (type == "item") {
      std::vector<ConceptId> tags;
      for (const auto& c : ev.at("concepts")) tags.push_back(model_.concepts.at(c.get<std::string>()));
      std::optional<int> options;
      if (!ev.at("options").is_null()) options = ev.at("options").get<int>();
      model_.add_item(ev.at("id").get<std::string>(), std::move(tags), options);
      item_correct_.push_back(0);
      if (!ev.at("answer_key").is_null()) answer_keys_[ev.at("id").get<std::string>()] = ev.at("answer_key");
      response = {{"item", ev.at("id")}, {"seq", seq}};
    } else if (type == "answer") {
      response = apply_answer(ev, seq);
    } else {
      throw ParseError("event log: unknown event type '" + type + "'");
    }
    seq_ = seq;
    return response;
  }

  json apply_answer(const json& ev, std::uint64_t seq) {
    const auto student = ev.at("student").get<std::string>();
    const auto item = ev.at("item").get<std::string>();
    const bool correct = ev.at("correct").get<bool>();
    const auto sid = model_.students.at(student);
    const auto iid = model_.items.at(item);
    auto& learner = model_.learners[sid.value];
    auto& st = model_.item_states[iid.value];
    const auto delta = update(learner, st, correct, model_.config);
    if (correct) ++item_correct_[iid.value];
    attempted_[sid].insert(iid);

    auto& ring = history_[sid];
    json ratings = json::object();
    for (const auto& d : delta.student_deltas) {
      const double now = d.target ? learner.concepts.at(*d.target).value : learner.global.value;
      ring.push_back({seq, d.target, now});
      if (ring.size() > opts_.history_capacity) ring.pop_front();
    }
    for (std::uint32_t c = 0; c < model_.concepts.size(); ++c)
      ratings[model_.concepts.name(ConceptId{c})] = learner.concept_rating(ConceptId{c}, model_.config.init_rating).value;

    json response{{"seq", seq},
                  {"student", student},
                  {"item", item},
                  {"correct", correct},
                  {"prediction", delta.probability},
                  {"delta", codec::to_json(delta, model_)},
                  {"difficulty", st.difficulty},
                  {"theta", learner.global.value},
                  {"ratings", ratings}};
    if (!ev.at("idempotency_key").is_null()) {
      idempotent_[ev.at("idempotency_key").get<std::string>()] = {
          {"request", {{"student", student}, {"item", item}, {"correct", correct}}}, {"response", response}};
    }
    return response;
  }

  json state_to_json() const {
    json attempted = json::object();
    for (const auto& [sid, items] : attempted_) {
      json a = json::array();
      for (auto i : items) a.push_back(model_.items.name(i));
      attempted[model_.students.name(sid)] = a;
    }
    json history = json::object();
    for (const auto& [sid, ring] : history_) {
      json h = json::array();
      for (const auto& p : ring)
        h.push_back({p.seq, p.target ? json(model_.concepts.name(*p.target)) : json(nullptr), p.rating});
      history[model_.students.name(sid)] = h;
    }
    return {{"seq", seq_},
            {"course", course_id_},
            {"model", codec::to_json(model_)},
            {"item_correct", item_correct_},
            {"answer_keys", answer_keys_},
            {"attempted", attempted},
            {"history", history},
            {"idempotency", idempotent_}};
  }

  void state_from_json(const json& j) {
    seq_ = j.at("seq").get<std::uint64_t>();
    course_id_ = j.at("course").get<std::string>();
    model_ = codec::model_from_json(j.at("model"));
    item_correct_ = j.at("item_correct").get<std::vector<std::uint64_t>>();
    answer_keys_ = j.at("answer_keys");
    for (auto it = j.at("attempted").begin(); it != j.at("attempted").end(); ++it) {
      auto& set = attempted_[model_.students.at(it.key())];
      for (const auto& i : *it) set.insert(model_.items.at(i.get<std::string>()));
    }
    for (auto it = j.at("history").begin(); it != j.at("history").end(); ++it) {
      auto& ring = history_[model_.students.at(it.key())];
      for (const auto& p : *it) {
        HistoryPoint hp{p.at(0).get<std::uint64_t>(), std::nullopt, p.at(2).get<double>()};
        if (!p.at(1).is_null()) hp.target = model_.concepts.at(p.at(1).get<std::string>());
        ring.push_back(hp);
      }
    }
    idempotent_ = j.at("idempotency");
  }

  void write_snapshot() {
    const auto tmp = dir_ / (std::string(kSnapshot) + ".tmp");
    {
      std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
      out << state_to_json().dump();
      out.flush();
      if (!out) throw Error("snapshot write failed");
    }
    if (opts_.fault) opts_.fault("before_snapshot_rename");
    std::filesystem::rename(tmp, dir_ / kSnapshot);
    snapshot_seq_ = seq_;
  }

  void recover() {
    const auto events = dir_ / kEvents;
    if (!std::filesystem::exists(events)) throw NotFound("no course at " + dir_.string());
    truncate_torn_tail(events);
    if (std::filesystem::exists(dir_ / kSnapshot)) {
      std::ifstream in(dir_ / kSnapshot, std::ios::binary);
      try {
        state_from_json(json::parse(in));
        snapshot_seq_ = seq_;
      } catch (const std::exception& e) {
        throw ParseError(std::string("snapshot unreadable: ") + e.what());
      }
    }
    std::ifstream in(events, std::ios::binary);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json ev;
      try {
        ev = json::parse(line);
      } catch (const std::exception& e) {
        throw ParseError("event log line " + std::to_string(lineno) + ": " + e.what());
      }
      if (ev.at("seq").get<std::uint64_t>() <= seq_) continue;
      apply(ev);
    }
    if (seq_ == 0) throw ParseError("event log is empty: " + events.string());
    open_log();
  }

  // An unterminated final line is a write that never completed (and was never
  // acknowledged); drop it.
  static void truncate_torn_tail(const std::filesystem::path& p) {
    const auto size = std::filesystem::file_size(p);
    if (size == 0) return;
    std::ifstream in(p, std::ios::binary);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.back() == '\n') return;
    const auto keep = data.rfind('\n');
    std::filesystem::resize_file(p, keep == std::string::npos ? 0 : keep + 1);
  }

  std::filesystem::path dir_;
  StoreOptions opts_;
  mutable std::shared_mutex mu_;
  std::ofstream log_;
  bool dead_{false};

  std::string course_id_;
  std::uint64_t seq_{0};
  std::uint64_t snapshot_seq_{0};
  Model model_;
  std::vector<std::uint64_t> item_correct_;
  json answer_keys_ = json::object();
  std::map<StudentId, std::set<ItemId>> attempted_;
  std::map<StudentId, std::deque<HistoryPoint>> history_;
  json idempotent_ = json::object();
};

// Independent recovery path: rebuilds rating state from the event log alone
// with a plain core replay, ignoring snapshots.
inline Model replay_event_log(const std::filesystem::path& events_file) {
  std::ifstream in(events_file, std::ios::binary);
  if (!in) throw NotFound("cannot read " + events_file.string());
  Model model;
  std::vector<Interaction> stream;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto ev = json::parse(line);
    const auto type = ev.at("type").get<std::string>();
    if (type == "course") {
      model = Model(codec::config_from_json(ev.at("config")));
      for (const auto& c : ev.at("concepts")) model.concepts.add(c.get<std::string>());
    } else if (type == "student") {
      model.add_student(ev.at("id").get<std::string>());
    } else if (type == "item") {
      std::vector<std::string> tags = ev.at("concepts").get<std::vector<std::string>>();
      std::optional<int> options;
      if (!ev.at("options").is_null()) options = ev.at("options").get<int>();
      model.add_item(ev.at("id").get<std::string>(), tags, options);
    } else if (type == "answer") {
      stream.push_back({model.students.at(ev.at("student").get<std::string>()),
                        model.items.at(ev.at("item").get<std::string>()), ev.at("correct").get<bool>(),
                        ev.at("seq").get<std::uint64_t>(), {}});
    }
  }
  replay(stream, model);
  return model;
}

}  // namespace melo::service
