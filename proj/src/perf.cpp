#include "tiercache/perf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "tiercache/error.hpp"

namespace tiercache {

PerfModel fit(std::span<const PerfPoint> points) {
  if (points.size() < 2) throw Error(ErrorKind::kDegenerateFit, "need at least two points");
  const double n = static_cast<double>(points.size());
  double mean_h = 0.0, mean_t = 0.0;
  for (const auto& p : points) {
    if (!(p.hit_rate >= 0.0 && p.hit_rate <= 1.0) || !(p.latency_ms > 0.0)) {
      throw Error(ErrorKind::kValidation, "points need hit_rate in [0,1] and latency > 0");
    }
    mean_h += p.hit_rate;
    mean_t += p.latency_ms;
  }
  mean_h /= n;
  mean_t /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.hit_rate - mean_h) * (p.hit_rate - mean_h);
    sxy += (p.hit_rate - mean_h) * (p.latency_ms - mean_t);
  }
  if (sxx <= 0.0) throw Error(ErrorKind::kDegenerateFit, "all hit rates are equal");

  PerfModel m;
  m.slope = sxy / sxx;
  m.intercept = mean_t - m.slope * mean_h;
  m.n_points = points.size();
  double sse = 0.0;
  for (const auto& p : points) {
    double r = p.latency_ms - (m.intercept + m.slope * p.hit_rate);
    sse += r * r;
  }
  m.rmse = std::sqrt(sse / n);
  return m;
}

double estimate(const PerfModel& model, double hit_rate) {
  if (!(hit_rate >= 0.0 && hit_rate <= 1.0)) {
    throw Error(ErrorKind::kOutOfRange, "hit rate " + std::to_string(hit_rate) + " not in [0,1]");
  }
  return std::max(0.0, model.intercept + model.slope * hit_rate);
}

double CostModel::latency_ms(double hit_rate) const {
  double per_access_us = hit_rate * hit_cost_us + (1.0 - hit_rate) * miss_cost_us;
  return base_ms + accesses_per_inference * per_access_us / 1000.0;
}

void write_fit_csv(const PerfModel& model, std::ostream& out) {
  out << "intercept_ms,slope_ms,rmse_ms,n_points\n"
      << model.intercept << ',' << model.slope << ',' << model.rmse << ',' << model.n_points
      << '\n';
}

}  // namespace tiercache
