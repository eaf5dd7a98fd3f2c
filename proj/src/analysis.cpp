#include "tiercache/analysis.hpp"

#include <algorithm>
#include <bit>
#include <ostream>
#include <unordered_map>

#include "tiercache/error.hpp"

namespace tiercache {

namespace {

class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}

  void add(std::size_t pos, std::int64_t delta) {
    for (++pos; pos < tree_.size(); pos += pos & (~pos + 1)) tree_[pos] += delta;
  }

  // Sum over [0, pos).
  std::int64_t prefix(std::size_t pos) const {
    std::int64_t s = 0;
    for (; pos > 0; pos -= pos & (~pos + 1)) s += tree_[pos];
    return s;
  }

 private:
  std::vector<std::int64_t> tree_;
};

}  // namespace

std::uint32_t reuse_bucket(std::uint64_t distance) {
  return distance == 0 ? 0 : static_cast<std::uint32_t>(std::bit_width(distance));
}

ReuseDistanceReport reuse_distances(const Trace& trace) {
  const auto& ids = trace.global_ids();
  ReuseDistanceReport report;
  report.per_access.resize(ids.size());

  // A 1 at position p marks p as the latest access of its id.
  Fenwick marks(ids.size());
  std::unordered_map<GlobalId, std::size_t> last;
  last.reserve(trace.unique_count() * 2);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, fresh] = last.try_emplace(ids[i], i);
    if (fresh) {
      ++report.cold_count;
    } else {
      std::size_t prev = it->second;
      auto distinct = static_cast<std::uint64_t>(marks.prefix(i) - marks.prefix(prev + 1));
      report.per_access[i] = distinct;
      ++report.histogram[reuse_bucket(distinct)];
      marks.add(prev, -1);
      it->second = i;
    }
    marks.add(i, 1);
  }
  return report;
}

std::vector<CdfPoint> frequency_cdf(const Trace& trace) {
  if (trace.empty()) throw Error(ErrorKind::kValidation, "frequency CDF of an empty trace");
  std::unordered_map<GlobalId, std::uint64_t> counts;
  for (auto id : trace.global_ids()) ++counts[id];
  std::vector<std::uint64_t> sorted;
  sorted.reserve(counts.size());
  for (auto& [id, c] : counts) sorted.push_back(c);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  std::vector<CdfPoint> cdf;
  cdf.reserve(sorted.size());
  const double n = static_cast<double>(trace.size());
  const double u = static_cast<double>(sorted.size());
  std::uint64_t cum = 0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cum += sorted[k];
    cdf.push_back({static_cast<double>(k + 1) / u, static_cast<double>(cum) / n});
  }
  cdf.back() = {1.0, 1.0};
  return cdf;
}

double top_share(const std::vector<CdfPoint>& cdf, double fraction) {
  double share = 0.0;
  for (const auto& p : cdf) {
    if (p.rank_fraction > fraction + 1e-12) break;
    share = p.access_fraction;
  }
  return share;
}

void write_histogram_csv(const ReuseDistanceReport& report, std::ostream& out) {
  out << "bucket,lower,upper,count\n";
  out << "cold,,," << report.cold_count << '\n';
  for (auto [bucket, count] : report.histogram) {
    std::uint64_t lower = bucket == 0 ? 0 : (std::uint64_t{1} << (bucket - 1));
    std::uint64_t upper = bucket == 0 ? 1 : (std::uint64_t{1} << bucket);
    out << bucket << ',' << lower << ',' << upper << ',' << count << '\n';
  }
}

void write_cdf_csv(const std::vector<CdfPoint>& cdf, std::ostream& out) {
  out << "rank_fraction,access_fraction\n";
  for (const auto& p : cdf) out << p.rank_fraction << ',' << p.access_fraction << '\n';
}

}  // namespace tiercache
