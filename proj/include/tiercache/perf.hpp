#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>

namespace tiercache {

struct PerfPoint {
  double hit_rate = 0.0;
  double latency_ms = 0.0;
};

/// latency = intercept + slope * hit_rate, fit by ordinary least squares.
struct PerfModel {
  double intercept = 0.0;
  double slope = 0.0;
  double rmse = 0.0;
  std::size_t n_points = 0;
};

/// Needs at least two points with distinct hit rates (kDegenerateFit).
PerfModel fit(std::span<const PerfPoint> points);

/// intercept + slope * hit_rate, floored at 0. kOutOfRange outside [0, 1].
double estimate(const PerfModel& model, double hit_rate);

/// Synthetic latency source: each inference performs a fixed number of
/// embedding accesses, each costing hit_cost_us or miss_cost_us.
struct CostModel {
  double hit_cost_us = 0.1;
  double miss_cost_us = 10.0;
  double accesses_per_inference = 10000.0;
  double base_ms = 0.0;

  double latency_ms(double hit_rate) const;
};

void write_fit_csv(const PerfModel& model, std::ostream& out);

}  // namespace tiercache
