#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "tiercache/error.hpp"
#include "tiercache/perf.hpp"

using namespace tiercache;

TEST_CASE("exact line") {
  std::vector<PerfPoint> pts;
  for (double h : {0.1, 0.3, 0.5, 0.9}) pts.push_back({h, 210.0 - 200.0 * h});
  auto m = fit(pts);
  CHECK(m.intercept == doctest::Approx(210.0));
  CHECK(m.slope == doctest::Approx(-200.0));
  CHECK(m.rmse == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(m.n_points == 4);
  CHECK(estimate(m, 1.0) == doctest::Approx(10.0));
  CHECK(estimate(m, 0.0) == doctest::Approx(210.0));
}

TEST_CASE("two points interpolate") {
  std::vector<PerfPoint> pts{{0.2, 50.0}, {0.6, 30.0}};
  auto m = fit(pts);
  CHECK(m.slope == doctest::Approx(-50.0));
  CHECK(m.intercept == doctest::Approx(60.0));
  CHECK(m.rmse < 1e-9);
}

TEST_CASE("noisy line is recovered") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> h(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 2.0);
  std::vector<PerfPoint> pts;
  for (int i = 0; i < 50; ++i) {
    double x = h(rng);
    pts.push_back({x, 210.0 - 200.0 * x + noise(rng)});
  }
  auto m = fit(pts);
  CHECK(std::abs(m.intercept - 210.0) <= 0.05 * 210.0);
  CHECK(std::abs(m.slope + 200.0) <= 0.05 * 200.0);
  CHECK(m.rmse <= 6.0);
}

TEST_CASE("errors") {
  std::vector<PerfPoint> same{{0.5, 10.0}, {0.5, 12.0}};
  try {
    fit(same);
    FAIL("expected a degenerate fit");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerateFit);
  }
  std::vector<PerfPoint> one{{0.5, 10.0}};
  CHECK_THROWS_AS(fit(one), Error);
  std::vector<PerfPoint> bad{{0.5, 10.0}, {1.5, 12.0}};
  CHECK_THROWS_AS(fit(bad), Error);
  PerfModel m{210.0, -200.0, 0.0, 2};
  CHECK_THROWS_AS(estimate(m, 1.01), Error);
  CHECK_THROWS_AS(estimate(m, -0.1), Error);
}

TEST_CASE("estimates rank like hit rates") {
  PerfModel m{210.0, -200.0, 0.0, 2};
  CHECK(estimate(m, 0.8) <= estimate(m, 0.6));
  CostModel cost;
  CHECK(cost.latency_ms(0.9) < cost.latency_ms(0.5));
  CHECK(cost.latency_ms(1.0) == doctest::Approx(1.0));
  CHECK(cost.latency_ms(0.0) == doctest::Approx(100.0));
  std::ostringstream out;
  write_fit_csv(m, out);
  CHECK(out.str().rfind("intercept_ms,slope_ms,rmse_ms,n_points\n", 0) == 0);
}
