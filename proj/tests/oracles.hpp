#pragma once

// Test-only reference implementations. Deliberately naive; they share no
// code with the library paths they check.

#include <algorithm>
#include <cstdint>
#include <list>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "tiercache/trace.hpp"

namespace oracle {

using tiercache::GlobalId;

// O(n^2) reuse distance by scanning back to the previous occurrence.
inline std::vector<std::optional<std::uint64_t>> naive_reuse(const std::vector<GlobalId>& ids) {
  std::vector<std::optional<std::uint64_t>> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::set<GlobalId> between;
    for (std::size_t j = i; j-- > 0;) {
      if (ids[j] == ids[i]) {
        out[i] = between.size();
        break;
      }
      between.insert(ids[j]);
    }
  }
  return out;
}

// Fully associative LRU kept as an explicit recency list.
inline std::size_t list_lru_hits(const std::vector<GlobalId>& ids, std::size_t capacity) {
  std::list<GlobalId> stack;
  std::size_t hits = 0;
  for (auto id : ids) {
    auto it = std::find(stack.begin(), stack.end(), id);
    if (it != stack.end()) {
      ++hits;
      stack.erase(it);
    } else if (stack.size() == capacity) {
      stack.pop_back();
    }
    stack.push_front(id);
  }
  return hits;
}

inline std::vector<GlobalId> random_ids(std::mt19937_64& rng, std::size_t length,
                                        std::size_t alphabet) {
  std::vector<GlobalId> ids(length);
  for (auto& id : ids) id = rng() % alphabet;
  return ids;
}

inline tiercache::Trace single_table(const std::vector<GlobalId>& ids, std::uint64_t rows) {
  return tiercache::Trace::from_global_ids(tiercache::Vocabulary({rows}), ids);
}

}  // namespace oracle
