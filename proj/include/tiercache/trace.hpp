#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace tiercache {

using GlobalId = std::uint64_t;

/// One embedding vector: a row of one table, plus its position on the
/// flattened index space (cumulative table offsets + row).
struct EmbeddingIndex {
  std::uint32_t table_id = 0;
  std::uint64_t row_id = 0;
  GlobalId global_id = 0;

  friend bool operator==(const EmbeddingIndex&, const EmbeddingIndex&) = default;
};

/// The set of embedding tables a trace indexes into.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::uint64_t> table_sizes);

  const std::vector<std::uint64_t>& table_sizes() const { return table_sizes_; }
  std::size_t table_count() const { return table_sizes_.size(); }
  /// Number of distinct global ids (sum of table sizes).
  std::uint64_t total() const { return total_; }

  /// Throws kValidation when the table or row is out of range.
  EmbeddingIndex index(std::uint32_t table_id, std::uint64_t row_id) const;
  EmbeddingIndex from_global(GlobalId global_id) const;

  /// FNV-1a over the table-size vector; stored in checkpoints.
  std::uint64_t hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.table_sizes_ == b.table_sizes_;
  }

 private:
  std::vector<std::uint64_t> table_sizes_;
  std::vector<std::uint64_t> offsets_;
  std::uint64_t total_ = 0;
};

/// An ordered sequence of embedding-vector accesses.
class Trace {
 public:
  Trace() = default;
  /// Validates every access against the vocabulary (kValidation).
  Trace(Vocabulary vocabulary, std::vector<EmbeddingIndex> accesses);

  static Trace from_global_ids(Vocabulary vocabulary, std::span<const GlobalId> ids);

  const Vocabulary& vocabulary() const { return vocabulary_; }
  const std::vector<EmbeddingIndex>& accesses() const { return accesses_; }
  const std::vector<GlobalId>& global_ids() const { return ids_; }
  std::size_t size() const { return accesses_.size(); }
  bool empty() const { return accesses_.empty(); }
  std::size_t unique_count() const { return unique_count_; }

  friend bool operator==(const Trace& a, const Trace& b) {
    return a.vocabulary_ == b.vocabulary_ && a.accesses_ == b.accesses_;
  }

 private:
  Vocabulary vocabulary_;
  std::vector<EmbeddingIndex> accesses_;
  std::vector<GlobalId> ids_;
  std::size_t unique_count_ = 0;
};

struct TraceGenConfig {
  std::vector<std::uint64_t> table_sizes;
  std::size_t total_accesses = 0;
  /// 0 gives a uniform distribution.
  double zipf_exponent = 1.0;
  /// Probability that an access repeats one of the recent distinct ids
  /// instead of drawing from the global Zipf distribution.
  double markov_stickiness = 0.0;
  std::size_t correlation_pool_size = 8;
  std::uint64_t rng_seed = 0;
};

/// Synthetic trace. Zipf rank r maps to global id r, so the hottest rows
/// sit at the low end of the index space. Deterministic in rng_seed.
Trace generate_trace(const TraceGenConfig& cfg);

/// Text format: a `tables: n1,n2,...` header, then one `table_id,row_id`
/// per line. Parse errors carry the 1-based line number.
Trace read_trace(std::istream& in);
Trace read_trace(const std::filesystem::path& path);
void write_trace(const Trace& trace, std::ostream& out);
void write_trace(const Trace& trace, const std::filesystem::path& path);

/// A fixed-length input chunk plus its evaluation window and (once
/// labeled) its caching labels and prefetch targets.
struct SequenceSample {
  std::size_t origin = 0;
  std::vector<EmbeddingIndex> input;
  std::vector<EmbeddingIndex> window;
  std::optional<std::vector<std::uint8_t>> cache_labels;
  std::optional<std::vector<EmbeddingIndex>> prefetch_targets;

  friend bool operator==(const SequenceSample&, const SequenceSample&) = default;
};

struct ChunkShape {
  std::size_t input_length = 15;
  std::size_t output_length = 5;
  std::size_t window_ratio = 3;

  std::size_t window_length() const { return output_length * window_ratio; }

  friend bool operator==(const ChunkShape&, const ChunkShape&) = default;
};

/// Non-overlapping chunks of `input_length` accesses. A chunk is emitted only
/// if a full evaluation window follows it; the window is the accesses right
/// after the chunk.
std::vector<SequenceSample> chunk(const Trace& trace, const ChunkShape& shape);

}  // namespace tiercache
