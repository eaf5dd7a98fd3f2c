#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include "tiercache/cache_sim.hpp"
#include "tiercache/trace.hpp"

namespace tiercache {

struct LabeledDataset {
  std::vector<SequenceSample> samples;
  std::size_t label_capacity = 0;
  Vocabulary vocabulary;
  ChunkShape shape;
  /// Samples removed by prefetch labeling because their window had no miss.
  std::size_t dropped = 0;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// optgen runs at 80% of the buffer so that prefetches have room.
/// Throws kInvalidConfig when the scaled capacity is below 1.
std::size_t optgen_label_capacity(std::size_t gpu_capacity);

/// Copies optgen keep decisions into each sample's cache_labels by origin.
LabeledDataset label_caching(const Trace& trace, std::vector<SequenceSample> samples,
                             const ChunkShape& shape, std::size_t gpu_capacity);

/// Prefetch targets are the first L_out optgen misses inside each window,
/// padded by repeating the last miss. Samples without a miss are dropped.
LabeledDataset label_prefetch(const Trace& trace, std::vector<SequenceSample> samples,
                              const ChunkShape& shape, std::size_t gpu_capacity);

/// Both labelings from one optgen run. Every sample keeps its caching labels;
/// samples without a window miss keep prefetch_targets unset and are counted
/// in `dropped`.
LabeledDataset label_dataset(const Trace& trace, std::vector<SequenceSample> samples,
                             const ChunkShape& shape, std::size_t gpu_capacity);

/// Samples with prefetch targets only.
LabeledDataset prefetch_subset(const LabeledDataset& dataset);

enum class SplitMode { kTail, kParity };

/// (train, validation). kTail puts the last `validation_fraction` of samples
/// (by origin) into validation; kParity sends odd-numbered samples there.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& dataset,
                                                        SplitMode mode,
                                                        double validation_fraction = 0.1);

/// One line per sample: `origin|inputs|labels|targets|window` where id lists
/// are space-separated `table:row` pairs and unset fields are `-`.
void write_dataset(const LabeledDataset& dataset, std::ostream& out);
void write_dataset(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset read_dataset(std::istream& in);
LabeledDataset read_dataset(const std::filesystem::path& path);

}  // namespace tiercache
