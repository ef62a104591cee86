#pragma once

// Reader for KDD Cup 2010 step-level logs (tab-separated, header row,
// "~~"-separated knowledge components).

#include <istream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "melo/core.hpp"
#include "melo/text.hpp"

namespace melo::kdd {

struct Columns {
  std::string student{"Anon Student Id"};
  std::string hierarchy{"Problem Hierarchy"};
  std::string problem{"Problem Name"};
  std::string step{"Step Name"};
  std::string correct{"Correct First Attempt"};
  std::string kc{"KC(Default)"};
  // Optional; copied into Interaction::timestamp when present.
  std::string timestamp{"First Transaction Time"};
};

struct RowError {
  std::size_t line{0};
  std::string message;
};

struct DiscardReport {
  std::size_t total_rows{0};
  std::size_t kept{0};
  // KC field empty, whitespace-only, or missing from a short row.
  std::size_t untagged{0};
  std::vector<RowError> errors;
  // Rows whose KC list disagreed with the first list seen for the same item.
  std::size_t kc_conflicts{0};

  [[nodiscard]] std::size_t discarded() const { return untagged + errors.size(); }
};

struct ParsedFile {
  std::vector<Interaction> interactions;
  DiscardReport report;
};

struct DatasetStats {
  std::size_t students{0};
  std::size_t concepts{0};
  std::size_t items{0};
  std::size_t multi_concept_items{0};
  std::size_t interactions{0};

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

// Accumulates a shared student/item/concept registry across files, so a test
// file parsed after its training file resolves to the same ids.
class Parser {
 public:
  explicit Parser(EngineConfig cfg = {}, Columns cols = {}) : model_(cfg), cols_(std::move(cols)) {}

  ParsedFile parse(std::istream& in) {
    ParsedFile out;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("kdd: empty input, header row required");
    ++lineno;
    text::chomp(line);
    const auto header = text::split(line, "\t");
    const auto col = [&](const std::string& name) -> std::size_t {
      for (std::size_t i = 0; i < header.size(); ++i)
        if (text::trim(header[i]) == name) return i;
      throw ParseError("kdd: missing required column '" + name + "'");
    };
    const std::size_t c_student = col(cols_.student), c_hier = col(cols_.hierarchy), c_problem = col(cols_.problem),
                      c_step = col(cols_.step), c_correct = col(cols_.correct), c_kc = col(cols_.kc);
    std::optional<std::size_t> c_time;
    for (std::size_t i = 0; i < header.size(); ++i)
      if (text::trim(header[i]) == cols_.timestamp) c_time = i;
    const std::size_t needed = std::max({c_student, c_hier, c_problem, c_step, c_correct});

    while (std::getline(in, line)) {
      ++lineno;
      text::chomp(line);
      if (line.empty()) continue;
      ++out.report.total_rows;
      const auto f = text::split(line, "\t");
      if (f.size() <= needed) {
        out.report.errors.push_back({lineno, "too few fields"});
        continue;
      }
      const auto student = text::trim(f[c_student]);
      if (student.empty()) {
        out.report.errors.push_back({lineno, "empty student id"});
        continue;
      }
      const auto correct = text::trim(f[c_correct]);
      if (correct != "0" && correct != "1") {
        out.report.errors.push_back({lineno, "correct-first-attempt must be 0 or 1, got '" + std::string(correct) + "'"});
        continue;
      }
      const auto sid = model_.add_student(student);

      std::vector<std::string> kcs;
      if (c_kc < f.size()) {
        std::set<std::string> seen;
        for (auto k : text::split(f[c_kc], "~~")) {
          auto t = std::string(text::trim(k));
          if (!t.empty() && seen.insert(t).second) kcs.push_back(std::move(t));
        }
      }
      if (kcs.empty()) {
        ++out.report.untagged;
        continue;
      }

      const auto iid = intern_item(f[c_hier], f[c_problem], f[c_step], kcs, out.report);
      Interaction x;
      x.student = sid;
      x.item = iid;
      x.correct = correct == "1";
      x.seq = lineno - 1;  // data-row ordinal
      if (c_time && *c_time < f.size()) {
        x.timestamp = std::string(text::trim(f[*c_time]));
        if (auto sp = x.timestamp.find(' '); sp != std::string::npos) x.timestamp[sp] = 'T';
      }
      out.interactions.push_back(std::move(x));
      ++out.report.kept;
    }
    return out;
  }

  [[nodiscard]] const Model& model() const { return model_; }
  [[nodiscard]] Model& model() { return model_; }

  // "hierarchy :: problem :: step" per ItemId.
  [[nodiscard]] const std::vector<std::string>& item_sources() const { return sources_; }

 private:
  ItemId intern_item(std::string_view hier, std::string_view problem, std::string_view step,
                     const std::vector<std::string>& kcs, DiscardReport& report) {
    std::string key;
    key.append(hier).push_back('\x1f');
    key.append(problem).push_back('\x1f');
    key.append(step);
    auto it = by_key_.find(key);
    if (it != by_key_.end()) {
      std::set<std::string> existing, incoming(kcs.begin(), kcs.end());
      for (auto c : model_.item_states[it->second.value].concepts) existing.insert(model_.concepts.name(c));
      if (existing != incoming) ++report.kc_conflicts;
      return it->second;
    }
    const auto id = model_.add_item("i" + std::to_string(model_.items.size()), kcs);
    by_key_.emplace(std::move(key), id);
    sources_.push_back(std::string(hier) + " :: " + std::string(problem) + " :: " + std::string(step));
    return id;
  }

  Model model_;
  Columns cols_;
  std::unordered_map<std::string, ItemId> by_key_;
  std::vector<std::string> sources_;
};

// Counts over a parsed registry and the interactions kept from it. Students
// are counted from the registry: a student whose every row was discarded
// still counts.
inline DatasetStats dataset_stats(const Model& model, std::span<const std::span<const Interaction>> streams) {
  DatasetStats s;
  s.students = model.students.size();
  s.items = model.items.size();
  std::set<ConceptId> used;
  for (const auto& it : model.item_states) {
    if (it.concepts.size() >= 2) ++s.multi_concept_items;
    used.insert(it.concepts.begin(), it.concepts.end());
  }
  s.concepts = used.size();
  for (const auto& st : streams) s.interactions += st.size();
  return s;
}

}  // namespace melo::kdd
