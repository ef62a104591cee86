#pragma once

// Line-oriented, tab-separated file formats shared by the simulator, the
// dataset ingester and the evaluator.
//
// Interaction log:
//   seq<TAB>student<TAB>item<TAB>correct<TAB>timestamp
//   one header row, then one record per line; correct is 0 or 1, timestamp
//   may be empty.
//
// Item registry:
//   #domain<TAB>concept~~concept~~...      (optional, fixes concept order)
//   item<TAB>concepts<TAB>options<TAB>source
//   concepts are "~~"-separated; options and source may be empty.

#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "melo/core.hpp"
#include "melo/text.hpp"

namespace melo::io {

inline constexpr std::string_view kLogHeader = "seq\tstudent\titem\tcorrect\ttimestamp";
inline constexpr std::string_view kRegistryHeader = "item\tconcepts\toptions\tsource";
inline constexpr std::string_view kConceptSep = "~~";

inline void write_log(std::ostream& out, const Model& model, std::span<const Interaction> stream) {
  out << kLogHeader << '\n';
  for (const auto& x : stream) {
    out << x.seq << '\t' << model.students.name(x.student) << '\t' << model.items.name(x.item) << '\t'
        << (x.correct ? 1 : 0) << '\t' << x.timestamp << '\n';
  }
}

// Students are interned on first sight. Items must already be registered
// unless `allow_unknown_items` is set, in which case they enter untagged.
inline std::vector<Interaction> read_log(std::istream& in, Model& model, bool allow_unknown_items = false) {
  std::vector<Interaction> out;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) return out;
  ++lineno;
  text::chomp(line);
  if (line != kLogHeader) throw ParseError("interaction log: unexpected header at line 1");
  while (std::getline(in, line)) {
    ++lineno;
    text::chomp(line);
    if (line.empty()) continue;
    auto f = text::split(line, "\t");
    auto where = [&] { return "interaction log line " + std::to_string(lineno) + ": "; };
    if (f.size() < 4 || f.size() > 5) throw ParseError(where() + "expected 4 or 5 fields");
    auto seq = text::parse_number<std::uint64_t>(f[0]);
    if (!seq) throw ParseError(where() + "bad seq");
    if (f[3] != "0" && f[3] != "1") throw ParseError(where() + "correct must be 0 or 1");
    if (f[1].empty() || f[2].empty()) throw ParseError(where() + "empty student or item id");
    if (!allow_unknown_items && !model.items.contains(f[2]))
      throw ParseError(where() + "item not in registry: " + std::string(f[2]));
    Interaction x;
    x.seq = *seq;
    x.student = model.add_student(f[1]);
    x.item = model.items.intern(f[2]);
    model.ensure_item(x.item);
    x.correct = f[3] == "1";
    if (f.size() == 5) x.timestamp = std::string(f[4]);
    if (!out.empty() && x.seq <= out.back().seq) throw ParseError(where() + "seq not strictly increasing");
    out.push_back(std::move(x));
  }
  return out;
}

struct RegistryEntry {
  std::string item;
  std::vector<std::string> concepts;
  std::optional<int> options;
  std::string source;
};

inline void write_registry(std::ostream& out, const Model& model, const std::vector<std::string>& sources = {}) {
  out << "#domain\t" << text::join(model.concepts.names(), kConceptSep) << '\n';
  out << kRegistryHeader << '\n';
  for (std::uint32_t i = 0; i < model.item_states.size(); ++i) {
    const auto& it = model.item_states[i];
    std::vector<std::string> names;
    for (auto c : it.concepts) names.push_back(model.concepts.name(c));
    out << model.items.name(ItemId{i}) << '\t' << text::join(names, kConceptSep) << '\t';
    if (it.options) out << *it.options;
    out << '\t' << (i < sources.size() ? sources[i] : std::string{}) << '\n';
  }
}

// Loads items (and the concept order, if present) into `model`.
inline std::vector<RegistryEntry> read_registry(std::istream& in, Model& model) {
  std::vector<RegistryEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    text::chomp(line);
    if (line.empty()) continue;
    auto where = [&] { return "item registry line " + std::to_string(lineno) + ": "; };
    if (!header_seen) {
      if (line.starts_with("#domain\t")) {
        for (auto c : text::split(std::string_view(line).substr(8), kConceptSep))
          if (!c.empty()) model.concepts.intern(c);
        continue;
      }
      if (line != kRegistryHeader) throw ParseError(where() + "unexpected header");
      header_seen = true;
      continue;
    }
    auto f = text::split(line, "\t");
    if (f.size() < 2 || f.size() > 4) throw ParseError(where() + "expected 2 to 4 fields");
    RegistryEntry e;
    e.item = std::string(f[0]);
    if (e.item.empty()) throw ParseError(where() + "empty item id");
    for (auto c : text::split(f[1], kConceptSep)) {
      auto t = text::trim(c);
      if (!t.empty()) e.concepts.emplace_back(t);
    }
    if (f.size() >= 3 && !f[2].empty()) {
      auto o = text::parse_number<int>(f[2]);
      if (!o || *o < 2) throw ParseError(where() + "options must be an integer >= 2");
      e.options = *o;
    }
    if (f.size() == 4) e.source = std::string(f[3]);
    model.add_item(e.item, e.concepts, e.options);
    entries.push_back(std::move(e));
  }
  if (!header_seen && lineno > 0) throw ParseError("item registry: missing header");
  return entries;
}

// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace melo::io
