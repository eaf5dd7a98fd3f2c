#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tiercache/cache_sim.hpp"
#include "tiercache/nn/model.hpp"
#include "tiercache/trace.hpp"

namespace tiercache {

/// Buffer whose entries carry an integer priority. Victims are chosen by
/// gpu_buffer_populate(); the scan runs from the least recently referenced
/// entry to the most recent one.
class PriorityBuffer {
 public:
  explicit PriorityBuffer(std::size_t capacity, int eviction_speed = 4);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return slots_.size(); }
  bool full() const { return slots_.size() >= capacity_; }
  int eviction_speed() const { return eviction_speed_; }

  bool contains(GlobalId id) const { return where_.contains(id); }
  std::optional<int> priority(GlobalId id) const;
  /// True while a prefetched entry has not been referenced.
  bool prefetched(GlobalId id) const;

  /// Requires room and an absent id.
  void insert(GlobalId id, int priority, bool prefetched);
  /// No-op for absent ids.
  void set_priority(GlobalId id, int priority);
  /// Demand reference: refreshes recency and clears the prefetch tag.
  void reference(GlobalId id);

  /// Evicts the minimum-priority entry (first in scan order on ties) and
  /// decrements every priority by one, floored at 0. Throws on empty.
  GlobalId evict();

  int max_priority() const;
  /// (id, priority) sorted by id.
  std::vector<std::pair<GlobalId, int>> snapshot() const;

 private:
  struct Slot {
    GlobalId id = 0;
    int priority = 0;
    std::uint64_t last_ref = 0;
    bool prefetched = false;
  };

  std::size_t capacity_;
  int eviction_speed_;
  std::vector<Slot> slots_;
  std::unordered_map<GlobalId, std::size_t> where_;
  std::uint64_t clock_ = 0;
};

/// Evicts one entry (see PriorityBuffer::evict) and returns its id.
GlobalId gpu_buffer_populate(PriorityBuffer& buffer);

/// priority[T[i]] = C[i] + eviction_speed for resident T[i];
/// then every prefetch id is inserted (evicting first if the buffer is full)
/// or, if already resident, has its priority reset to eviction_speed.
void load_embeddings(PriorityBuffer& buffer, std::span<const GlobalId> chunk,
                     std::span<const std::uint8_t> cache_bits,
                     std::span<const GlobalId> prefetch);

/// What an advisor sees for one chunk. `trace` and `origin` let oracles look
/// ahead; learned advisors only read `input`.
struct ChunkView {
  const Trace& trace;
  std::size_t origin;
  std::span<const EmbeddingIndex> input;
};

class CachingAdvisor {
 public:
  virtual ~CachingAdvisor() = default;
  /// One bit per input access.
  virtual std::vector<std::uint8_t> advise(const ChunkView& chunk) = 0;
  /// Vocabulary the advisor was built for, if it has one.
  virtual const Vocabulary* vocabulary() const { return nullptr; }
};

class PrefetchAdvisor {
 public:
  virtual ~PrefetchAdvisor() = default;
  virtual std::vector<GlobalId> predict(const ChunkView& chunk) = 0;
  virtual const Vocabulary* vocabulary() const { return nullptr; }
};

/// Thresholds the caching model's probabilities at 0.5.
class ModelCachingAdvisor : public CachingAdvisor {
 public:
  explicit ModelCachingAdvisor(const nn::ModelParameters& model);
  std::vector<std::uint8_t> advise(const ChunkView& chunk) override;
  const Vocabulary* vocabulary() const override { return &model_.vocabulary; }

 private:
  const nn::ModelParameters& model_;
};

/// Decodes the prefetch model's outputs to ids.
class ModelPrefetchAdvisor : public PrefetchAdvisor {
 public:
  explicit ModelPrefetchAdvisor(const nn::ModelParameters& model);
  std::vector<GlobalId> predict(const ChunkView& chunk) override;
  const Vocabulary* vocabulary() const override { return &model_.vocabulary; }

 private:
  const nn::ModelParameters& model_;
};

/// optgen keep decisions at 80% of `gpu_capacity`.
class OptgenCachingOracle : public CachingAdvisor {
 public:
  OptgenCachingOracle(const Trace& trace, std::size_t gpu_capacity);
  std::vector<std::uint8_t> advise(const ChunkView& chunk) override;

 private:
  std::vector<std::uint8_t> keep_;
};

/// The first `output_length` optgen misses (at 80% of `gpu_capacity`) inside
/// the chunk's evaluation window.
class OptgenPrefetchOracle : public PrefetchAdvisor {
 public:
  OptgenPrefetchOracle(const Trace& trace, std::size_t gpu_capacity, const ChunkShape& shape);
  std::vector<GlobalId> predict(const ChunkView& chunk) override;

 private:
  std::vector<std::uint8_t> hit_;
  ChunkShape shape_;
};

struct ReplayConfig {
  std::size_t capacity = 1;
  int eviction_speed = 4;
  ChunkShape shape;
};

struct BreakdownReport {
  std::string label;
  std::size_t capacity = 0;
  std::size_t total = 0;
  std::size_t cache_hits = 0;
  std::size_t prefetch_hits = 0;
  std::size_t on_demand = 0;
  std::size_t prefetch_issued = 0;
  std::size_t prefetch_useful = 0;
  /// Mean coverage over chunks where the prefetcher ran.
  double coverage = 0.0;
  std::size_t chunks_scored = 0;
  /// Largest occupancy seen after any insertion.
  std::size_t max_occupancy = 0;
  /// Largest priority seen right after any load_embeddings call.
  int max_priority_after_load = 0;

  double correctness() const {
    return prefetch_issued == 0
               ? 0.0
               : static_cast<double>(prefetch_useful) / static_cast<double>(prefetch_issued);
  }
  double hit_rate() const {
    return total == 0 ? 0.0
                      : static_cast<double>(cache_hits + prefetch_hits) / static_cast<double>(total);
  }
};

/// |unique(out) ∩ unique(gt)| / |unique(gt)|; 0 for an empty ground truth.
double coverage(std::span<const GlobalId> out, std::span<const GlobalId> ground_truth);

/// Replays the trace chunk by chunk through a PriorityBuffer. Each access is
/// served first (demand misses are inserted with priority eviction_speed);
/// after each full chunk the advisors run and load_embeddings applies their
/// output. Null advisors mean all-zero bits / no prefetch. Refuses
/// (kVocabularyMismatch) advisors built for another vocabulary.
BreakdownReport replay(const Trace& trace, const ReplayConfig& cfg, CachingAdvisor* caching,
                       PrefetchAdvisor* prefetch);

/// The same loop with a cache_sim policy managing the buffer instead of the
/// priority scheme. An optional prefetcher fills the buffer after each chunk
/// (not supported for optgen, which has no online form).
BreakdownReport replay_policy_only(const Trace& trace, const CacheConfig& cache,
                                   const ChunkShape& shape, PrefetchAdvisor* prefetch = nullptr);

/// Header plus one row per report. When `latency_ms` is given it must match
/// `reports` in length and is appended as an estimated-latency column.
void write_breakdown_csv(std::span<const BreakdownReport> reports, std::ostream& out,
                         std::span<const double> latency_ms = {});

}  // namespace tiercache
