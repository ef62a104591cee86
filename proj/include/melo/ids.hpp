#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace melo {

// Error hierarchy. Everything the library throws derives from melo::Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct NotFound : Error {
  using Error::Error;
};

// Dense handle into a Registry. Tag keeps student/item/concept handles apart.
template <typename Tag>
struct Id {
  std::uint32_t value{0};

  constexpr auto operator<=>(const Id&) const = default;
};

struct StudentTag {};
struct ItemTag {};
struct ConceptTag {};

using StudentId = Id<StudentTag>;
using ItemId = Id<ItemTag>;
using ConceptId = Id<ConceptTag>;

// Bidirectional name <-> dense id map. Ids are assigned in insertion order and
// never reused.
template <typename Tag>
class Registry {
 public:
  using id_type = Id<Tag>;

  id_type intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    id_type id{static_cast<std::uint32_t>(names_.size())};
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
  }

  // Rejects duplicates, unlike intern().
  id_type add(std::string_view name) {
    if (contains(name)) throw DomainError("duplicate identifier: " + std::string(name));
    return intern(name);
  }

  [[nodiscard]] bool contains(std::string_view name) const {
    return index_.find(std::string(name)) != index_.end();
  }

  [[nodiscard]] id_type at(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw NotFound("unknown identifier: " + std::string(name));
    return it->second;
  }

  [[nodiscard]] const std::string& name(id_type id) const { return names_.at(id.value); }
  [[nodiscard]] std::size_t size() const { return names_.size(); }
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const Registry& a, const Registry& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, id_type> index_;
};

}  // namespace melo

template <typename Tag>
struct std::hash<melo::Id<Tag>> {
  std::size_t operator()(const melo::Id<Tag>& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
