#pragma once

// Stratified k-fold assignment over (label, language) cells.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "abuse/corpus.hpp"
#include "abuse/error.hpp"
#include "abuse/random.hpp"

namespace abuse {

struct FoldAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;

  std::size_t size() const noexcept { return fold_of.size(); }

  std::vector<std::size_t> rows_in(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] == fold) out.push_back(i);
    }
    return out;
  }

  /// Rows whose fold is not in `excluded`.
  std::vector<std::size_t> rows_outside(std::initializer_list<std::size_t> excluded) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      bool keep = true;
      for (auto f : excluded) keep = keep && fold_of[i] != f;
      if (keep) out.push_back(i);
    }
    return out;
  }

  friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

/// Cells are visited in (label, language) order; each cell's units are
/// shuffled with one seeded stream and dealt round-robin, continuing from
/// the fold where the previous cell stopped. Per-cell fold sizes therefore
/// differ by at most one unit, and so do overall fold sizes.
///
/// With `group_by_base_id`, records sharing base_id (the `#raw`/`#clean`
/// copies of an oversampled corpus) form one unit and land in one fold.
inline FoldAssignment make_folds(const Corpus& corpus, std::size_t k, std::uint64_t seed, bool group_by_base_id = false) {
  const auto labels = corpus.labels();
  std::vector<std::vector<std::size_t>> units;
  std::map<std::pair<int, LanguageTag>, std::vector<std::size_t>> cells;
  {
    std::map<std::string, std::size_t> unit_of;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto& record = corpus[i];
      if (group_by_base_id) {
        const auto key = base_id(record.id);
        const auto [it, inserted] = unit_of.emplace(key, units.size());
        if (!inserted) {
          units[it->second].push_back(i);
          continue;
        }
      }
      cells[{labels[i], record.language}].push_back(units.size());
      units.push_back({i});
    }
  }
  if (k < 2 || k > units.size()) {
    fail(ErrorKind::BadK, "k=" + std::to_string(k) + " outside [2, " + std::to_string(units.size()) + "]");
  }

  FoldAssignment out;
  out.k = k;
  out.fold_of.assign(corpus.size(), 0);
  Rng rng(seed);
  std::size_t next = 0;
  for (auto& [cell, members] : cells) {
    rng.shuffle(members);
    for (auto unit : members) {
      for (auto row : units[unit]) out.fold_of[row] = next;
      next = (next + 1) % k;
    }
  }
  return out;
}

}  // namespace abuse
