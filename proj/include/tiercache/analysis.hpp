#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "tiercache/trace.hpp"

namespace tiercache {

/// Reuse distance: the number of distinct ids touched between two
/// consecutive accesses to the same id. First touches are cold and carry
/// no distance.
struct ReuseDistanceReport {
  std::vector<std::optional<std::uint64_t>> per_access;
  /// Bucket 0 holds distance 0; bucket k >= 1 holds [2^(k-1), 2^k).
  std::map<std::uint32_t, std::uint64_t> histogram;
  std::uint64_t cold_count = 0;
};

std::uint32_t reuse_bucket(std::uint64_t distance);

/// O(n log n) via a Fenwick tree over last-occurrence positions.
ReuseDistanceReport reuse_distances(const Trace& trace);

struct CdfPoint {
  double rank_fraction = 0.0;
  double access_fraction = 0.0;
};

/// Access CDF over ids sorted by descending frequency; one point per
/// unique id, the last is (1, 1). Throws kValidation on an empty trace.
std::vector<CdfPoint> frequency_cdf(const Trace& trace);

/// Share of accesses that go to the most frequent `fraction` of unique ids.
double top_share(const std::vector<CdfPoint>& cdf, double fraction);

void write_histogram_csv(const ReuseDistanceReport& report, std::ostream& out);
void write_cdf_csv(const std::vector<CdfPoint>& cdf, std::ostream& out);

}  // namespace tiercache
