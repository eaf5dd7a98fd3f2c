#include <numeric>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "tiercache/error.hpp"
#include "tiercache/labeler.hpp"

using namespace tiercache;

namespace {

std::vector<GlobalId> ids_of(const std::vector<EmbeddingIndex>& xs) {
  std::vector<GlobalId> out;
  for (const auto& x : xs) out.push_back(x.global_id);
  return out;
}

// The whole trace as one input chunk with an empty window.
std::vector<SequenceSample> whole(const Trace& t) {
  SequenceSample s;
  s.origin = 0;
  s.input = t.accesses();
  return {s};
}

}  // namespace

TEST_CASE("label capacity is 80% of the buffer") {
  CHECK(optgen_label_capacity(3) == 2);
  CHECK(optgen_label_capacity(10) == 8);
  CHECK(optgen_label_capacity(2244) == 1795);
  CHECK_THROWS_AS(optgen_label_capacity(1), Error);
}

TEST_CASE("caching labels follow optgen keep decisions") {
  auto t = oracle::single_table({0, 1, 0, 2, 1}, 4);
  ChunkShape shape{5, 1, 1};
  auto ds = label_caching(t, whole(t), shape, 3);
  REQUIRE(ds.samples.size() == 1);
  CHECK(ds.label_capacity == 2);
  CHECK(*ds.samples[0].cache_labels == std::vector<std::uint8_t>{1, 1, 0, 0, 0});

  std::vector<GlobalId> distinct(20);
  std::iota(distinct.begin(), distinct.end(), 0);
  auto td = oracle::single_table(distinct, 20);
  ChunkShape s5{5, 1, 1};
  for (const auto& s : label_caching(td, chunk(td, s5), s5, 5).samples) {
    CHECK(*s.cache_labels == std::vector<std::uint8_t>(5, 0));
  }

  auto same = oracle::single_table(std::vector<GlobalId>(10, 3), 4);
  ChunkShape s10{10, 1, 1};
  auto labels = *label_caching(same, whole(same), s10, 2).samples[0].cache_labels;
  CHECK(labels == std::vector<std::uint8_t>{1, 1, 1, 1, 1, 1, 1, 1, 1, 0});
}

TEST_CASE("prefetch targets are the first window misses, padded") {
  // Capacity 2 (gpu 3). Window [4,5,4,6,7,8,...] misses on 4,5,6,7,...
  ChunkShape shape{3, 2, 2};
  auto t = oracle::single_table({0, 1, 0, 4, 5, 4, 6}, 10);
  auto ds = label_prefetch(t, chunk(t, shape), shape, 3);
  REQUIRE(ds.samples.size() == 1);
  CHECK(ids_of(*ds.samples[0].prefetch_targets) == std::vector<GlobalId>{4, 5});

  ChunkShape pad{2, 5, 1};
  auto t2 = oracle::single_table({0, 1, 7, 8, 7, 8, 7}, 10);
  auto ds2 = label_prefetch(t2, chunk(t2, pad), pad, 3);
  REQUIRE(ds2.samples.size() == 1);
  CHECK(ids_of(*ds2.samples[0].prefetch_targets) == std::vector<GlobalId>{7, 8, 8, 8, 8});
}

TEST_CASE("windows without misses are dropped") {
  ChunkShape shape{2, 2, 1};
  auto t = oracle::single_table({0, 1, 0, 1, 0, 1}, 4);
  auto ds = label_prefetch(t, chunk(t, shape), shape, 3);
  // Windows [0,1] (after the first chunk) are all hits.
  CHECK(ds.samples.empty());
  CHECK(ds.dropped == 2);

  auto both = label_dataset(t, chunk(t, shape), shape, 3);
  CHECK(both.samples.size() == 2);
  CHECK(both.dropped == 2);
  CHECK(prefetch_subset(both).samples.empty());
}

TEST_CASE("labels are deterministic and consistent across labelings") {
  TraceGenConfig cfg{{300, 200}, 5000, 1.1, 0.4, 8, 5};
  auto t = generate_trace(cfg);
  ChunkShape shape;
  auto a = label_dataset(t, chunk(t, shape), shape, 60);
  auto b = label_dataset(t, chunk(t, shape), shape, 60);
  CHECK(a == b);
  auto pf = label_prefetch(t, chunk(t, shape), shape, 60);
  auto sub = prefetch_subset(a);
  REQUIRE(sub.samples.size() == pf.samples.size());
  for (std::size_t i = 0; i < pf.samples.size(); ++i) {
    CHECK(sub.samples[i].origin == pf.samples[i].origin);
    CHECK(sub.samples[i].prefetch_targets == pf.samples[i].prefetch_targets);
  }
  CHECK(pf.dropped == a.dropped);
  for (const auto& s : pf.samples) {
    CHECK(s.prefetch_targets->size() == shape.output_length);
  }
}

TEST_CASE("splits") {
  TraceGenConfig cfg{{100}, 1500, 1.0, 0.0, 8, 2};
  auto t = generate_trace(cfg);
  ChunkShape shape;
  auto ds = label_dataset(t, chunk(t, shape), shape, 20);
  auto [train, val] = split_dataset(ds, SplitMode::kTail, 0.25);
  CHECK(train.samples.size() + val.samples.size() == ds.samples.size());
  CHECK(val.samples.size() == ds.samples.size() / 4);
  CHECK(train.samples.back().origin < val.samples.front().origin);
  auto [even, odd] = split_dataset(ds, SplitMode::kParity);
  CHECK(even.samples.size() == (ds.samples.size() + 1) / 2);
  CHECK(odd.samples.front().origin == ds.samples[1].origin);
}

TEST_CASE("dataset text round trip") {
  TraceGenConfig cfg{{50, 30}, 900, 1.0, 0.2, 8, 3};
  auto t = generate_trace(cfg);
  ChunkShape shape;
  auto ds = label_dataset(t, chunk(t, shape), shape, 25);
  std::stringstream ss;
  write_dataset(ds, ss);
  CHECK(read_dataset(ss) == ds);

  std::istringstream bad("tables: 4\nlabel_capacity: 2\nshape: 15,5,3\ndropped: 0\n0|oops\n");
  CHECK_THROWS_AS(read_dataset(bad), Error);
}
