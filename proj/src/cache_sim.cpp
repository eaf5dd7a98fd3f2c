#include "tiercache/cache_sim.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <tuple>

#include "tiercache/error.hpp"

namespace tiercache {

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::kLru: return "lru";
    case Policy::kLfu: return "lfu";
    case Policy::kSrrip: return "srrip";
    case Policy::kOptgen: return "optgen";
  }
  return "unknown";
}

Policy parse_policy(std::string_view name) {
  if (name == "lru") return Policy::kLru;
  if (name == "lfu") return Policy::kLfu;
  if (name == "srrip") return Policy::kSrrip;
  if (name == "optgen") return Policy::kOptgen;
  throw Error(ErrorKind::kInvalidConfig, "unknown policy '" + std::string(name) + "'");
}

void CacheConfig::validate() const {
  if (capacity < 1) throw Error(ErrorKind::kInvalidConfig, "capacity must be >= 1");
  if (ways != 0 && capacity % ways != 0) {
    throw Error(ErrorKind::kInvalidConfig, "ways must divide capacity");
  }
  if (srrip_max_rrpv < 1) throw Error(ErrorKind::kInvalidConfig, "srrip_max_rrpv must be >= 1");
}

ReplacementCache::ReplacementCache(const CacheConfig& cfg)
    : cfg_(cfg), ways_(cfg.ways_per_set()), sets_(cfg.set_count()) {
  cfg_.validate();
  if (cfg_.policy == Policy::kOptgen) {
    throw Error(ErrorKind::kInvalidConfig, "optgen is offline; use simulate_optgen");
  }
  lines_.resize(cfg_.capacity);
  occupied_.assign(sets_, 0);
  where_.reserve(cfg_.capacity * 2);
}

void ReplacementCache::touch(Line& line) {
  line.stamp = ++clock_;
  switch (cfg_.policy) {
    case Policy::kLfu: ++line.freq; break;
    case Policy::kSrrip: line.rrpv = 0; break;
    default: break;
  }
}

std::size_t ReplacementCache::pick_victim(std::size_t set) {
  const std::size_t base = set * ways_;
  if (cfg_.policy == Policy::kSrrip) {
    for (;;) {
      for (std::size_t w = 0; w < ways_; ++w) {
        if (lines_[base + w].rrpv >= cfg_.srrip_max_rrpv) return base + w;
      }
      for (std::size_t w = 0; w < ways_; ++w) ++lines_[base + w].rrpv;
    }
  }
  std::size_t best = base;
  for (std::size_t w = 1; w < ways_; ++w) {
    const Line& cand = lines_[base + w];
    const Line& cur = lines_[best];
    bool better = cfg_.policy == Policy::kLfu
                      ? std::tie(cand.freq, cand.stamp) < std::tie(cur.freq, cur.stamp)
                      : cand.stamp < cur.stamp;
    if (better) best = base + w;
  }
  return best;
}

std::optional<GlobalId> ReplacementCache::insert(GlobalId id) {
  const std::size_t set = id % sets_;
  const std::size_t base = set * ways_;
  std::optional<GlobalId> evicted;
  std::size_t slot;
  if (occupied_[set] < ways_) {
    slot = base;
    while (lines_[slot].valid) ++slot;
    ++occupied_[set];
  } else {
    slot = pick_victim(set);
    evicted = lines_[slot].id;
    where_.erase(lines_[slot].id);
  }
  Line& line = lines_[slot];
  line.id = id;
  line.valid = true;
  line.stamp = ++clock_;
  line.freq = 1;
  line.rrpv = std::max(cfg_.srrip_max_rrpv - 1, 0);
  where_[id] = slot;
  return evicted;
}

bool ReplacementCache::access(GlobalId id) {
  auto it = where_.find(id);
  if (it != where_.end()) {
    touch(lines_[it->second]);
    return true;
  }
  insert(id);
  return false;
}

std::optional<GlobalId> ReplacementCache::fill(GlobalId id) {
  if (contains(id)) return std::nullopt;
  return insert(id);
}

namespace {

// Fully associative LRU in O(1) per access; the general path scans a set.
SimResult simulate_fa_lru(std::span<const GlobalId> ids, std::size_t capacity) {
  SimResult r;
  r.per_access_hit.resize(ids.size());
  std::vector<std::pair<std::size_t, std::size_t>> links;  // prev, next
  std::vector<GlobalId> owner;
  std::unordered_map<GlobalId, std::size_t> where;
  constexpr std::size_t kNil = static_cast<std::size_t>(-1);
  std::size_t head = kNil, tail = kNil;  // head = MRU
  auto unlink = [&](std::size_t n) {
    auto [p, q] = links[n];
    if (p != kNil) links[p].second = q; else head = q;
    if (q != kNil) links[q].first = p; else tail = p;
  };
  auto push_front = [&](std::size_t n) {
    links[n] = {kNil, head};
    if (head != kNil) links[head].first = n;
    head = n;
    if (tail == kNil) tail = n;
  };
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = where.find(ids[i]);
    if (it != where.end()) {
      ++r.hits;
      r.per_access_hit[i] = 1;
      unlink(it->second);
      push_front(it->second);
      continue;
    }
    ++r.misses;
    std::size_t node;
    if (owner.size() < capacity) {
      node = owner.size();
      owner.push_back(ids[i]);
      links.emplace_back(kNil, kNil);
    } else {
      node = tail;
      unlink(node);
      where.erase(owner[node]);
      owner[node] = ids[i];
    }
    where[ids[i]] = node;
    push_front(node);
  }
  return r;
}

}  // namespace

SimResult simulate(std::span<const GlobalId> ids, const CacheConfig& cfg) {
  cfg.validate();
  if (cfg.policy == Policy::kOptgen) return simulate_optgen(ids, cfg.capacity, cfg.ways);
  if (cfg.policy == Policy::kLru && cfg.ways_per_set() == cfg.capacity) {
    return simulate_fa_lru(ids, cfg.capacity);
  }
  ReplacementCache cache(cfg);
  SimResult r;
  r.per_access_hit.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (cache.access(ids[i])) {
      ++r.hits;
      r.per_access_hit[i] = 1;
    } else {
      ++r.misses;
    }
  }
  return r;
}

SimResult simulate(const Trace& trace, const CacheConfig& cfg) {
  return simulate(std::span<const GlobalId>(trace.global_ids()), cfg);
}

SimResult simulate_optgen(std::span<const GlobalId> ids, std::size_t capacity,
                          std::size_t ways) {
  CacheConfig cfg{capacity, ways, Policy::kOptgen, 3};
  cfg.validate();
  const std::size_t n = ids.size();
  const std::size_t sets = cfg.set_count();
  const std::size_t ways_per_set = cfg.ways_per_set();

  std::vector<std::size_t> next_use(n, n);
  {
    std::unordered_map<GlobalId, std::size_t> upcoming;
    for (std::size_t i = n; i-- > 0;) {
      auto [it, fresh] = upcoming.try_emplace(ids[i], i);
      if (!fresh) {
        next_use[i] = it->second;
        it->second = i;
      }
    }
  }

  // Ordered by next use; among equal next use (only "never again" can tie)
  // larger ids sort first, so the last element is the victim.
  struct Farthest {
    bool operator()(const std::pair<std::size_t, GlobalId>& a,
                    const std::pair<std::size_t, GlobalId>& b) const {
      if (a.first != b.first) return a.first < b.first;
      return a.second > b.second;
    }
  };
  std::vector<std::set<std::pair<std::size_t, GlobalId>, Farthest>> resident(sets);
  std::unordered_map<GlobalId, std::size_t> resident_next;

  SimResult r;
  r.per_access_hit.resize(n);
  r.keep_decisions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const GlobalId id = ids[i];
    auto& set = resident[id % sets];
    auto it = resident_next.find(id);
    if (it != resident_next.end()) {
      ++r.hits;
      r.per_access_hit[i] = 1;
      set.erase({it->second, id});
    } else {
      ++r.misses;
      if (set.size() >= ways_per_set) {
        auto victim = std::prev(set.end());
        resident_next.erase(victim->second);
        set.erase(victim);
      }
    }
    set.insert({next_use[i], id});
    resident_next[id] = next_use[i];
  }
  // A block is kept from i to its next use iff that next use hits.
  for (std::size_t i = 0; i < n; ++i) {
    r.keep_decisions[i] = next_use[i] < n ? r.per_access_hit[next_use[i]] : 0;
  }
  return r;
}

SimResult simulate_optgen(const Trace& trace, std::size_t capacity) {
  return simulate_optgen(std::span<const GlobalId>(trace.global_ids()), capacity);
}

std::size_t brute_force_optimal(std::span<const GlobalId> ids, std::size_t capacity) {
  if (ids.size() > 14 || capacity > 4) {
    throw Error(ErrorKind::kOutOfRange,
                "brute force limited to traces of <= 14 accesses and capacity <= 4");
  }
  if (capacity < 1) throw Error(ErrorKind::kInvalidConfig, "capacity must be >= 1");

  std::map<std::pair<std::size_t, std::vector<GlobalId>>, std::size_t> memo;
  auto best = [&](auto&& self, std::size_t pos, std::vector<GlobalId> cache) -> std::size_t {
    if (pos == ids.size()) return 0;
    std::sort(cache.begin(), cache.end());
    auto key = std::make_pair(pos, cache);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t result;
    const GlobalId id = ids[pos];
    if (std::find(cache.begin(), cache.end(), id) != cache.end()) {
      result = 1 + self(self, pos + 1, cache);
    } else if (cache.size() < capacity) {
      cache.push_back(id);
      result = self(self, pos + 1, cache);
    } else {
      result = 0;
      for (std::size_t v = 0; v < cache.size(); ++v) {
        auto next = cache;
        next[v] = id;
        result = std::max(result, self(self, pos + 1, std::move(next)));
      }
    }
    memo.emplace(std::move(key), result);
    return result;
  };
  return best(best, 0, {});
}

std::vector<SweepRow> sweep(const Trace& trace, std::span<const Policy> policies,
                            std::span<const std::size_t> capacities, std::size_t ways) {
  std::vector<SweepRow> rows;
  for (auto policy : policies) {
    for (auto capacity : capacities) {
      CacheConfig cfg{capacity, ways, policy, 3};
      auto r = simulate(trace, cfg);
      rows.push_back({policy, capacity, r.hits, r.hit_rate()});
    }
  }
  return rows;
}

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out) {
  out << "policy,capacity,hits,hit_rate\n";
  for (const auto& row : rows) {
    out << to_string(row.policy) << ',' << row.capacity << ',' << row.hits << ','
        << row.hit_rate << '\n';
  }
}

}  // namespace tiercache
