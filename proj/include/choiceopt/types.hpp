#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace choiceopt {

/// Opaque item token. Items are referred to by index into a Universe in all
/// numeric code; ids appear only at the API boundary and in files.
using ItemId = std::string;

/// Sentinel utility meaning exp-utility exactly zero.
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Thrown for violated preconditions and malformed requests. The CLI maps it
/// to exit code 2.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a choice distribution is degenerate (every member has
/// exp-utility zero).
class DegenerateDistribution : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Ordered set of item ids with index lookup.
class Universe {
 public:
  Universe() = default;
  explicit Universe(std::vector<ItemId> items) : items_(std::move(items)) {
    for (int i = 0; i < static_cast<int>(items_.size()); ++i) {
      if (items_[i].empty()) throw SpecError("universe items must be non-empty strings");
      auto [it, inserted] = index_.emplace(items_[i], i);
      if (!inserted) throw SpecError("duplicate item id in universe: " + items_[i]);
    }
  }

  int size() const { return static_cast<int>(items_.size()); }
  const ItemId& id(int index) const { return items_.at(index); }
  const std::vector<ItemId>& items() const { return items_; }

  bool contains(const ItemId& id) const { return index_.count(id) > 0; }

  int index_of(const ItemId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw SpecError("unknown item id: " + id);
    return it->second;
  }

  bool operator==(const Universe& other) const { return items_ == other.items_; }

 private:
  std::vector<ItemId> items_;
  std::unordered_map<ItemId, int> index_;
};

/// Subsets of a universe are sorted vectors of item indices.
using ItemSet = std::vector<int>;

inline bool set_contains(std::span<const int> set, int item) {
  return std::find(set.begin(), set.end(), item) != set.end();
}

/// Sorted union of two index sets.
inline ItemSet set_union(std::span<const int> a, std::span<const int> b) {
  ItemSet out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// A universe split into the base choice set C and the alternative pool C-bar.
/// The order of `alternatives` is preserved: the approximation table processes
/// alternatives in exactly this order, and results depend on it.
struct ChoiceInstance {
  Universe universe;
  ItemSet choice_set;            // C, sorted
  std::vector<int> alternatives; // C-bar, in given order

  ChoiceInstance() = default;
  ChoiceInstance(Universe u, ItemSet c, std::vector<int> alts)
      : universe(std::move(u)), choice_set(std::move(c)), alternatives(std::move(alts)) {
    validate();
  }

  static ChoiceInstance from_ids(Universe u, const std::vector<ItemId>& c,
                                 const std::vector<ItemId>& alts) {
    ItemSet ci, ai;
    for (const auto& id : c) ci.push_back(u.index_of(id));
    for (const auto& id : alts) ai.push_back(u.index_of(id));
    std::sort(ci.begin(), ci.end());
    return ChoiceInstance(std::move(u), std::move(ci), std::move(ai));
  }

  int k() const { return static_cast<int>(choice_set.size()); }
  int m() const { return static_cast<int>(alternatives.size()); }

  void validate() const {
    if (choice_set.empty()) throw SpecError("choice set C must be non-empty");
    std::vector<char> seen(universe.size(), 0);
    for (int x : choice_set) {
      if (x < 0 || x >= universe.size()) throw SpecError("choice set index out of range");
      if (seen[x]++) throw SpecError("duplicate item in choice set");
    }
    for (int z : alternatives) {
      if (z < 0 || z >= universe.size()) throw SpecError("alternative index out of range");
      if (seen[z]++) throw SpecError("item appears in both C and C-bar, or twice in C-bar");
    }
    for (int i = 0; i < universe.size(); ++i)
      if (!seen[i])
        throw SpecError("item " + universe.id(i) + " belongs to neither C nor C-bar");
    if (!std::is_sorted(choice_set.begin(), choice_set.end()))
      throw SpecError("choice set must be sorted by universe index");
  }
};

/// Candidate intervention Z: a subset of the instance's alternatives,
/// stored as sorted universe indices.
struct AlternativeSet {
  ItemSet members;

  AlternativeSet() = default;
  explicit AlternativeSet(ItemSet m) : members(std::move(m)) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
  }

  int size() const { return static_cast<int>(members.size()); }
  bool operator==(const AlternativeSet& o) const { return members == o.members; }
};

inline void require_subset_of_alternatives(const AlternativeSet& z, const ChoiceInstance& inst) {
  for (int i : z.members)
    if (!set_contains(inst.alternatives, i))
      throw SpecError("set member " + inst.universe.id(i) + " is not in the alternative pool");
}

/// Lexicographic order on the sorted member id lists; used for all
/// deterministic tie-breaking among equally good sets.
inline bool lex_less(const AlternativeSet& a, const AlternativeSet& b, const Universe& u) {
  auto ids = [&](const AlternativeSet& s) {
    std::vector<ItemId> out;
    out.reserve(s.members.size());
    for (int i : s.members) out.push_back(u.id(i));
    std::sort(out.begin(), out.end());
    return out;
  };
  return ids(a) < ids(b);
}

}  // namespace choiceopt
