#include "tiercache/runtime.hpp"

#include <algorithm>
#include <ostream>
#include <unordered_set>

#include "tiercache/error.hpp"
#include "tiercache/labeler.hpp"

namespace tiercache {

PriorityBuffer::PriorityBuffer(std::size_t capacity, int eviction_speed)
    : capacity_(capacity), eviction_speed_(eviction_speed) {
  if (capacity_ < 1) throw Error(ErrorKind::kInvalidConfig, "buffer capacity must be >= 1");
  if (eviction_speed_ < 0) throw Error(ErrorKind::kInvalidConfig, "eviction speed must be >= 0");
  slots_.reserve(capacity_);
  where_.reserve(capacity_ * 2);
}

std::optional<int> PriorityBuffer::priority(GlobalId id) const {
  auto it = where_.find(id);
  if (it == where_.end()) return std::nullopt;
  return slots_[it->second].priority;
}

bool PriorityBuffer::prefetched(GlobalId id) const {
  auto it = where_.find(id);
  return it != where_.end() && slots_[it->second].prefetched;
}

void PriorityBuffer::insert(GlobalId id, int priority, bool prefetched) {
  if (contains(id)) throw Error(ErrorKind::kValidation, "id already resident");
  if (full()) throw Error(ErrorKind::kValidation, "insert into a full buffer");
  where_[id] = slots_.size();
  slots_.push_back({id, std::max(priority, 0), ++clock_, prefetched});
}

void PriorityBuffer::set_priority(GlobalId id, int priority) {
  auto it = where_.find(id);
  if (it != where_.end()) slots_[it->second].priority = std::max(priority, 0);
}

void PriorityBuffer::reference(GlobalId id) {
  auto it = where_.find(id);
  if (it == where_.end()) return;
  slots_[it->second].last_ref = ++clock_;
  slots_[it->second].prefetched = false;
}

GlobalId PriorityBuffer::evict() {
  if (slots_.empty()) throw Error(ErrorKind::kValidation, "eviction from an empty buffer");
  // Scanning in recency order with a strict `<` keeps the least recently
  // referenced entry among equal minimum priorities.
  std::size_t victim = 0;
  for (std::size_t i = 1; i < slots_.size(); ++i) {
    const Slot& s = slots_[i];
    const Slot& v = slots_[victim];
    if (s.priority < v.priority || (s.priority == v.priority && s.last_ref < v.last_ref)) {
      victim = i;
    }
  }
  for (auto& s : slots_) s.priority = std::max(0, s.priority - 1);
  const GlobalId id = slots_[victim].id;
  where_.erase(id);
  if (victim != slots_.size() - 1) {
    slots_[victim] = slots_.back();
    where_[slots_[victim].id] = victim;
  }
  slots_.pop_back();
  return id;
}

int PriorityBuffer::max_priority() const {
  int best = 0;
  for (const auto& s : slots_) best = std::max(best, s.priority);
  return best;
}

std::vector<std::pair<GlobalId, int>> PriorityBuffer::snapshot() const {
  std::vector<std::pair<GlobalId, int>> out;
  out.reserve(slots_.size());
  for (const auto& s : slots_) out.emplace_back(s.id, s.priority);
  std::sort(out.begin(), out.end());
  return out;
}

GlobalId gpu_buffer_populate(PriorityBuffer& buffer) { return buffer.evict(); }

void load_embeddings(PriorityBuffer& buffer, std::span<const GlobalId> chunk,
                     std::span<const std::uint8_t> cache_bits,
                     std::span<const GlobalId> prefetch) {
  if (chunk.size() != cache_bits.size()) {
    throw Error(ErrorKind::kValidation, "one caching bit per chunk access required");
  }
  const int speed = buffer.eviction_speed();
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    buffer.set_priority(chunk[i], cache_bits[i] + speed);
  }
  for (GlobalId p : prefetch) {
    if (!buffer.contains(p)) {
      if (buffer.full()) gpu_buffer_populate(buffer);
      buffer.insert(p, speed, true);
    } else {
      buffer.set_priority(p, speed);
    }
  }
}

ModelCachingAdvisor::ModelCachingAdvisor(const nn::ModelParameters& model) : model_(model) {
  if (model.shape.kind != nn::ModelKind::kCaching) {
    throw Error(ErrorKind::kInvalidConfig, "caching advisor needs a caching model");
  }
}

std::vector<std::uint8_t> ModelCachingAdvisor::advise(const ChunkView& chunk) {
  auto probs = nn::forward_caching(model_, chunk.input);
  std::vector<std::uint8_t> bits(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) bits[i] = probs[i] >= 0.5;
  return bits;
}

ModelPrefetchAdvisor::ModelPrefetchAdvisor(const nn::ModelParameters& model) : model_(model) {
  if (model.shape.kind != nn::ModelKind::kPrefetch) {
    throw Error(ErrorKind::kInvalidConfig, "prefetch advisor needs a prefetch model");
  }
}

std::vector<GlobalId> ModelPrefetchAdvisor::predict(const ChunkView& chunk) {
  auto po = nn::forward_prefetch(model_, chunk.input);
  std::vector<GlobalId> ids;
  ids.reserve(po.size());
  for (const auto& e : nn::decode_indices(po, model_.vocabulary)) ids.push_back(e.global_id);
  return ids;
}

OptgenCachingOracle::OptgenCachingOracle(const Trace& trace, std::size_t gpu_capacity)
    : keep_(simulate_optgen(trace, optgen_label_capacity(gpu_capacity)).keep_decisions) {}

std::vector<std::uint8_t> OptgenCachingOracle::advise(const ChunkView& chunk) {
  auto first = keep_.begin() + static_cast<std::ptrdiff_t>(chunk.origin);
  return {first, first + static_cast<std::ptrdiff_t>(chunk.input.size())};
}

OptgenPrefetchOracle::OptgenPrefetchOracle(const Trace& trace, std::size_t gpu_capacity,
                                           const ChunkShape& shape)
    : hit_(simulate_optgen(trace, optgen_label_capacity(gpu_capacity)).per_access_hit),
      shape_(shape) {}

std::vector<GlobalId> OptgenPrefetchOracle::predict(const ChunkView& chunk) {
  std::vector<GlobalId> out;
  const auto& ids = chunk.trace.global_ids();
  const std::size_t start = chunk.origin + chunk.input.size();
  const std::size_t stop = std::min(ids.size(), start + shape_.window_length());
  for (std::size_t i = start; i < stop && out.size() < shape_.output_length; ++i) {
    if (!hit_[i]) out.push_back(ids[i]);
  }
  return out;
}

double coverage(std::span<const GlobalId> out, std::span<const GlobalId> ground_truth) {
  std::unordered_set<GlobalId> gt(ground_truth.begin(), ground_truth.end());
  if (gt.empty()) return 0.0;
  std::unordered_set<GlobalId> predicted(out.begin(), out.end());
  std::size_t common = 0;
  for (auto id : predicted) common += gt.contains(id);
  return static_cast<double>(common) / static_cast<double>(gt.size());
}

namespace {

void check_vocabulary(const Trace& trace, const Vocabulary* vocab) {
  if (vocab && !(*vocab == trace.vocabulary())) {
    throw Error(ErrorKind::kVocabularyMismatch,
                "model vocabulary does not match the trace's tables");
  }
}

// Scores one chunk's prefetches against its evaluation window.
void score_prefetch(const std::vector<GlobalId>& ids, std::size_t window_start,
                    std::size_t window_length, std::span<const GlobalId> predicted,
                    BreakdownReport& report, double& coverage_sum) {
  const std::size_t stop = std::min(ids.size(), window_start + window_length);
  if (window_start >= stop) return;
  std::span<const GlobalId> window(ids.data() + window_start, stop - window_start);
  std::unordered_set<GlobalId> in_window(window.begin(), window.end());
  report.prefetch_issued += predicted.size();
  for (auto id : predicted) report.prefetch_useful += in_window.contains(id);
  coverage_sum += coverage(predicted, window);
  ++report.chunks_scored;
}

}  // namespace

BreakdownReport replay(const Trace& trace, const ReplayConfig& cfg, CachingAdvisor* caching,
                       PrefetchAdvisor* prefetch) {
  if (caching) check_vocabulary(trace, caching->vocabulary());
  if (prefetch) check_vocabulary(trace, prefetch->vocabulary());
  const ChunkShape& shape = cfg.shape;
  if (shape.input_length == 0) throw Error(ErrorKind::kInvalidConfig, "input length must be >= 1");

  PriorityBuffer buffer(cfg.capacity, cfg.eviction_speed);
  BreakdownReport report;
  report.label = std::string(caching ? "caching" : "none") + "+" + (prefetch ? "prefetch" : "none");
  report.capacity = cfg.capacity;
  report.total = trace.size();
  const auto& ids = trace.global_ids();
  const auto& accesses = trace.accesses();
  double coverage_sum = 0.0;

  for (std::size_t origin = 0; origin < ids.size(); origin += shape.input_length) {
    const std::size_t end = std::min(ids.size(), origin + shape.input_length);
    for (std::size_t i = origin; i < end; ++i) {
      const GlobalId id = ids[i];
      if (buffer.contains(id)) {
        ++(buffer.prefetched(id) ? report.prefetch_hits : report.cache_hits);
        buffer.reference(id);
        continue;
      }
      ++report.on_demand;
      if (buffer.full()) gpu_buffer_populate(buffer);
      buffer.insert(id, cfg.eviction_speed, false);
      buffer.reference(id);
      report.max_occupancy = std::max(report.max_occupancy, buffer.size());
    }
    if (end - origin < shape.input_length) break;

    std::span<const GlobalId> chunk_ids(ids.data() + origin, end - origin);
    ChunkView view{trace, origin,
                   std::span<const EmbeddingIndex>(accesses.data() + origin, end - origin)};
    std::vector<std::uint8_t> bits =
        caching ? caching->advise(view) : std::vector<std::uint8_t>(chunk_ids.size(), 0);
    std::vector<GlobalId> predicted;
    if (prefetch) {
      predicted = prefetch->predict(view);
      score_prefetch(ids, end, shape.window_length(), predicted, report, coverage_sum);
    }
    load_embeddings(buffer, chunk_ids, bits, predicted);
    report.max_occupancy = std::max(report.max_occupancy, buffer.size());
    report.max_priority_after_load =
        std::max(report.max_priority_after_load, buffer.max_priority());
  }
  if (report.chunks_scored) coverage_sum /= static_cast<double>(report.chunks_scored);
  report.coverage = coverage_sum;
  return report;
}

BreakdownReport replay_policy_only(const Trace& trace, const CacheConfig& cache,
                                   const ChunkShape& shape, PrefetchAdvisor* prefetch) {
  cache.validate();
  if (prefetch) check_vocabulary(trace, prefetch->vocabulary());
  BreakdownReport report;
  report.label = std::string(to_string(cache.policy)) + (prefetch ? "+prefetch" : "");
  report.capacity = cache.capacity;
  report.total = trace.size();

  if (cache.policy == Policy::kOptgen) {
    if (prefetch) throw Error(ErrorKind::kInvalidConfig, "optgen cannot take prefetches");
    auto r = simulate_optgen(std::span<const GlobalId>(trace.global_ids()), cache.capacity,
                             cache.ways);
    report.cache_hits = r.hits;
    report.on_demand = r.misses;
    report.max_occupancy = std::min(cache.capacity, trace.unique_count());
    return report;
  }

  ReplacementCache buffer(cache);
  std::unordered_set<GlobalId> tagged;
  const auto& ids = trace.global_ids();
  const auto& accesses = trace.accesses();
  double coverage_sum = 0.0;
  for (std::size_t origin = 0; origin < ids.size(); origin += shape.input_length) {
    const std::size_t end = std::min(ids.size(), origin + shape.input_length);
    for (std::size_t i = origin; i < end; ++i) {
      if (buffer.access(ids[i])) {
        ++(tagged.erase(ids[i]) ? report.prefetch_hits : report.cache_hits);
      } else {
        ++report.on_demand;
        tagged.erase(ids[i]);
      }
      report.max_occupancy = std::max(report.max_occupancy, buffer.size());
    }
    if (!prefetch || end - origin < shape.input_length) continue;
    ChunkView view{trace, origin,
                   std::span<const EmbeddingIndex>(accesses.data() + origin, end - origin)};
    auto predicted = prefetch->predict(view);
    score_prefetch(ids, end, shape.window_length(), predicted, report, coverage_sum);
    for (auto id : predicted) {
      if (buffer.contains(id)) continue;
      if (auto evicted = buffer.fill(id)) tagged.erase(*evicted);
      tagged.insert(id);
      report.max_occupancy = std::max(report.max_occupancy, buffer.size());
    }
  }
  if (report.chunks_scored) coverage_sum /= static_cast<double>(report.chunks_scored);
  report.coverage = coverage_sum;
  return report;
}

void write_breakdown_csv(std::span<const BreakdownReport> reports, std::ostream& out,
                         std::span<const double> latency_ms) {
  if (!latency_ms.empty() && latency_ms.size() != reports.size()) {
    throw Error(ErrorKind::kValidation, "one latency estimate per report required");
  }
  out << "policy,capacity,cache_hits,prefetch_hits,on_demand,correctness,coverage";
  if (!latency_ms.empty()) out << ",est_latency_ms";
  out << '\n';
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << r.label << ',' << r.capacity << ',' << r.cache_hits << ',' << r.prefetch_hits << ','
        << r.on_demand << ',' << r.correctness() << ',' << r.coverage;
    if (!latency_ms.empty()) out << ',' << latency_ms[i];
    out << '\n';
  }
}

}  // namespace tiercache
