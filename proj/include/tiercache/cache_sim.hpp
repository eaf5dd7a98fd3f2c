#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tiercache/trace.hpp"

namespace tiercache {

enum class Policy { kLru, kLfu, kSrrip, kOptgen };

std::string_view to_string(Policy policy);
/// Accepts lru, lfu, srrip, optgen (case-sensitive); kInvalidConfig otherwise.
Policy parse_policy(std::string_view name);

struct CacheConfig {
  std::size_t capacity = 1;
  /// 0 means fully associative; otherwise ways per set, dividing capacity.
  std::size_t ways = 0;
  Policy policy = Policy::kLru;
  int srrip_max_rrpv = 3;

  void validate() const;
  std::size_t ways_per_set() const { return ways == 0 ? capacity : ways; }
  std::size_t set_count() const { return capacity / ways_per_set(); }
};

struct SimResult {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::vector<std::uint8_t> per_access_hit;
  /// OPTGEN only: 1 iff the accessed block stays resident until its next use.
  std::vector<std::uint8_t> keep_decisions;

  double hit_rate() const {
    auto n = hits + misses;
    return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
  }
};

/// Online buffer with an LRU, LFU or SRRIP replacement policy. Set index is
/// global_id mod set_count. Empty ways are filled lowest-index first.
///
/// LFU evicts the least recently used among minimum-frequency blocks; the
/// counter starts at 1 on insertion and is dropped on eviction. SRRIP inserts
/// at max-1, promotes to 0 on hit, and evicts the first way at max (aging the
/// whole set when none is).
class ReplacementCache {
 public:
  explicit ReplacementCache(const CacheConfig& cfg);

  bool contains(GlobalId id) const { return where_.contains(id); }
  std::size_t size() const { return where_.size(); }
  std::size_t capacity() const { return cfg_.capacity; }

  /// Demand reference. Returns true on a hit; on a miss the block is inserted.
  bool access(GlobalId id);
  /// Inserts without counting a reference (prefetch). No-op when resident.
  /// Returns the evicted id, if any.
  std::optional<GlobalId> fill(GlobalId id);

 private:
  struct Line {
    GlobalId id = 0;
    bool valid = false;
    std::uint64_t stamp = 0;
    std::uint64_t freq = 0;
    int rrpv = 0;
  };

  std::optional<GlobalId> insert(GlobalId id);
  std::size_t pick_victim(std::size_t set);
  void touch(Line& line);

  CacheConfig cfg_;
  std::size_t ways_;
  std::size_t sets_;
  std::vector<Line> lines_;
  std::vector<std::size_t> occupied_;
  std::unordered_map<GlobalId, std::size_t> where_;
  std::uint64_t clock_ = 0;
};

SimResult simulate(std::span<const GlobalId> ids, const CacheConfig& cfg);
SimResult simulate(const Trace& trace, const CacheConfig& cfg);

/// Belady MIN with demand insertion: on a miss with a full set, evict the
/// block whose next use is farthest away; among blocks never used again the
/// smaller global id goes first. Fills keep_decisions (last touches are 0).
SimResult simulate_optgen(std::span<const GlobalId> ids, std::size_t capacity,
                          std::size_t ways = 0);
SimResult simulate_optgen(const Trace& trace, std::size_t capacity);

/// Exhaustive maximum hit count over every sequence of victim choices.
/// Refuses (kOutOfRange) traces longer than 14 or capacities above 4.
std::size_t brute_force_optimal(std::span<const GlobalId> ids, std::size_t capacity);

struct SweepRow {
  Policy policy = Policy::kLru;
  std::size_t capacity = 0;
  std::size_t hits = 0;
  double hit_rate = 0.0;
};

std::vector<SweepRow> sweep(const Trace& trace, std::span<const Policy> policies,
                            std::span<const std::size_t> capacities, std::size_t ways = 0);
void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out);

}  // namespace tiercache
