// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tiercache/analysis.hpp"
#include "tiercache/cache_sim.hpp"
#include "tiercache/labeler.hpp"
#include "tiercache/nn/loss.hpp"
#include "tiercache/nn/train.hpp"
#include "tiercache/perf.hpp"
#include "tiercache/runtime.hpp"

using namespace tiercache;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << " | failed: ";
      else detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// State shared by the end-to-end criteria.
struct EndToEnd {
  std::optional<Trace> trace;
  std::size_t capacity = 0;
  ChunkShape shape;
  std::optional<nn::ModelParameters> caching;
  std::optional<nn::ModelParameters> prefetch;
  std::vector<BreakdownReport> replays;
};

EndToEnd e2e;

// Replays checked by the runtime-algebra criterion, with their capacities.
struct ReplayRecord {
  BreakdownReport report;
  std::size_t trace_length;
  std::size_t capacity;
  int eviction_speed;
};
std::vector<ReplayRecord> replay_log;

BreakdownReport logged_replay(const Trace& t, const ReplayConfig& cfg, CachingAdvisor* c,
                              PrefetchAdvisor* p) {
  auto r = replay(t, cfg, c, p);
  replay_log.push_back({r, t.size(), cfg.capacity, cfg.eviction_speed});
  return r;
}

// ---------------------------------------------------------------------------

void belady_optimality(Outcome& out) {
  auto t0 = Clock::now();
  std::mt19937_64 rng(2001);
  std::size_t small = 0, mismatches = 0;
  for (; small < 250; ++small) {
    auto ids = oracle::random_ids(rng, 1 + rng() % 14, 2 + rng() % 6);
    std::size_t cap = 1 + rng() % 4;
    if (simulate_optgen(ids, cap).hits != brute_force_optimal(ids, cap)) ++mismatches;
  }
  out.require(mismatches == 0, std::to_string(mismatches) + " small traces differ from brute force");

  std::size_t large = 0, violations = 0;
  for (; large < 120; ++large) {
    std::vector<GlobalId> ids;
    if (large % 2 == 0) {
      ids = oracle::random_ids(rng, 10000, 100 + rng() % 2000);
    } else {
      TraceGenConfig cfg{{500 + rng() % 5000}, 10000, 0.5 + (rng() % 10) / 10.0,
                         (rng() % 6) / 10.0, 8, rng()};
      ids = generate_trace(cfg).global_ids();
    }
    std::size_t cap = 4 + rng() % 400;
    auto opt = simulate_optgen(ids, cap).hits;
    for (auto p : {Policy::kLru, Policy::kLfu, Policy::kSrrip}) {
      if (opt < simulate(ids, {cap, 0, p, 3}).hits) ++violations;
    }
  }
  out.require(violations == 0, std::to_string(violations) + " online policies beat optgen");
  double secs = seconds_since(t0);
  out.require(secs < 60.0, "runtime over 1 min");
  out.detail << small << " small traces exact, " << large << " traces of 1e4 dominate, " << secs
             << "s";
}

void lru_reuse_crosscheck(Outcome& out) {
  std::mt19937_64 rng(2002);
  std::size_t traces = 0, mismatches = 0, comparisons = 0;
  for (; traces < 120; ++traces) {
    auto ids = oracle::random_ids(rng, 100 + rng() % 5000, 2 + rng() % 800);
    auto t = oracle::single_table(ids, 1000);
    auto report = reuse_distances(t);
    for (std::size_t cap : {1ul, 2ul, 1 + rng() % 50, 1 + rng() % 500}) {
      std::size_t predicted = 0;
      for (const auto& d : report.per_access) predicted += d && *d < cap;
      mismatches += simulate(t, {cap, 0, Policy::kLru, 3}).hits != predicted;
      ++comparisons;
    }
  }
  out.require(mismatches == 0, std::to_string(mismatches) + " capacity cells disagree");
  out.detail << traces << " traces, " << comparisons << " capacities, exact";
}

void gradient_correctness(Outcome& out) {
  auto t0 = Clock::now();
  auto tr = generate_trace({{40, 20}, 2000, 0.8, 0.3, 8, 5});
  ChunkShape shape;
  auto ds = label_dataset(tr, chunk(tr, shape), shape, 12);
  struct Case {
    nn::ModelKind model;
    nn::LossKind loss;
  };
  for (auto c : {Case{nn::ModelKind::kCaching, nn::LossKind::kCrossEntropy},
                 Case{nn::ModelKind::kPrefetch, nn::LossKind::kChamfer2}}) {
    double worst = 0.0;
    std::string where;
    std::size_t checked = 0, excluded = 0;
    const int draws = 20;
    for (int d = 0; d < draws; ++d) {
      auto m = nn::make_model(nn::default_shape(c.model), tr.vocabulary(), 100 + d, 0.3);
      std::vector<SequenceSample> batch{ds.samples[2 * d], ds.samples[2 * d + 1]};
      auto r = nn::gradient_check(m, batch, {0.7, 3, c.loss}, 1e-4, 8);
      checked += r.checked;
      excluded += r.excluded;
      if (r.max_relative_error > worst) {
        worst = r.max_relative_error;
        where = r.worst_parameter;
      }
    }
    out.require(worst <= 1e-3, std::string(nn::to_string(c.loss)) + " rel error " +
                                    std::to_string(worst) + " at " + where);
    out.require(checked > 0, "nothing checked");
    out.detail << nn::to_string(c.loss) << ": " << draws << " draws, max rel " << worst << " ("
               << checked << " checked, " << excluded << " tie-excluded); ";
  }
  double secs = seconds_since(t0);
  out.require(secs < 120.0, "runtime over 2 min");
  out.detail << secs << "s";
}

void chamfer_example(Outcome& out) {
  std::vector<double> po{1, 2, 3}, w{2, 6, 7, 8};
  double one = nn::chamfer_one_sided(po, w);
  double two = nn::chamfer_loss(po, w, 0.7);
  out.require(one == 2.0, "one-sided = " + std::to_string(one));
  out.require(std::abs(two - 1.3667) <= 1e-4, "two-sided = " + std::to_string(two));
  out.detail << "one-sided " << one << ", alpha 0.7 loss " << two;
}

void ablation(Outcome& out) {
  auto tr = generate_trace({{1000}, 20000, 0.5, 0.3, 8, 1});
  ChunkShape shape;
  auto ds = prefetch_subset(label_dataset(tr, chunk(tr, shape), shape, tr.unique_count() / 5));
  nn::TrainConfig cfg;
  cfg.max_steps = 500;
  auto init = nn::make_model(nn::default_shape(nn::ModelKind::kPrefetch), tr.vocabulary(), 3);

  auto one = nn::train(ds, init, cfg, {0.7, 3, nn::LossKind::kChamfer1});
  auto two = nn::train(ds, init, cfg, {0.7, 3, nn::LossKind::kChamfer2});
  out.require(!one.diverged && !two.diverged, "training diverged");
  out.require(one.loss_curve.size() == 500 && two.loss_curve.size() == 500, "short loss curve");
  if (!out.pass) return;
  double spread_one = nn::output_spread(one.params, ds.samples);
  double spread_two = nn::output_spread(two.params, ds.samples);
  double l10 = two.loss_curve[9], l500 = two.loss_curve[499];
  out.require(spread_one < 0.01, "one-sided spread " + std::to_string(spread_one));
  out.require(spread_two >= 0.05, "two-sided spread " + std::to_string(spread_two));
  out.require(l500 < l10, "two-sided loss did not fall");
  out.detail << "one-sided spread " << spread_one << ", two-sided spread " << spread_two
             << ", two-sided loss step10 " << l10 << " -> step500 " << l500;
}

void end_to_end(Outcome& out) {
  auto t0 = Clock::now();
  e2e.trace = generate_trace({{10000}, 100000, 1.2, 0.3, 8, 1});
  const auto& tr = *e2e.trace;
  e2e.capacity = tr.unique_count() / 5;
  out.require(tr.unique_count() >= 5000, "only " + std::to_string(tr.unique_count()) + " unique");
  auto ds = label_dataset(tr, chunk(tr, e2e.shape), e2e.shape, e2e.capacity);

  nn::TrainConfig cfg;
  cfg.max_steps = 500;
  auto cm = nn::train(ds, nn::make_model(nn::default_shape(nn::ModelKind::kCaching),
                                         tr.vocabulary(), 1),
                      cfg, {0.7, 3, nn::LossKind::kCrossEntropy});
  auto pm = nn::train(prefetch_subset(ds),
                      nn::make_model(nn::default_shape(nn::ModelKind::kPrefetch), tr.vocabulary(), 2),
                      cfg, {0.7, 3, nn::LossKind::kChamfer2});
  out.require(!cm.diverged && !pm.diverged, "training diverged");
  e2e.caching = std::move(cm.params);
  e2e.prefetch = std::move(pm.params);

  ModelCachingAdvisor ca(*e2e.caching);
  ModelPrefetchAdvisor pa(*e2e.prefetch);
  ReplayConfig rc{e2e.capacity, 4, e2e.shape};
  auto only = logged_replay(tr, rc, &ca, nullptr);
  auto full = logged_replay(tr, rc, &ca, &pa);
  auto lru = replay_policy_only(tr, {e2e.capacity, 0, Policy::kLru, 3}, e2e.shape);
  auto fa_lru = simulate(tr, {e2e.capacity, 0, Policy::kLru, 3});

  const auto model_hits = only.cache_hits + only.prefetch_hits;
  out.require(model_hits >= fa_lru.hits, "caching model hits below FA-LRU");
  out.require(full.on_demand <= only.on_demand, "prefetch raised on-demand fetches");
  out.require(only.on_demand <= lru.on_demand, "caching-only worse than LRU-only");
  double secs = seconds_since(t0);
  out.require(secs < 900.0, "runtime over 15 min");
  out.detail << tr.unique_count() << " unique, buffer " << e2e.capacity << "; hits model "
             << model_hits << " vs FA-LRU " << fa_lru.hits << "; on_demand full " << full.on_demand
             << " <= caching-only " << only.on_demand << " <= LRU-only " << lru.on_demand
             << "; prefetch correctness " << full.correctness() << ", coverage " << full.coverage
             << "; " << secs << "s";
}

void window_sensitivity(Outcome& out) {
  if (!e2e.prefetch) {
    out.require(false, "needs the end-to-end prefetch model");
    return;
  }
  const auto& tr = *e2e.trace;
  ChunkShape widest{e2e.shape.input_length, e2e.shape.output_length, 4};
  auto samples = chunk(tr, widest);
  std::vector<double> correctness;
  for (std::size_t ratio = 1; ratio <= 4; ++ratio) {
    auto cut = samples;
    for (auto& s : cut) s.window.resize(widest.output_length * ratio);
    correctness.push_back(nn::prefetch_correctness(*e2e.prefetch, cut));
  }
  for (std::size_t i = 1; i < correctness.size(); ++i) {
    out.require(correctness[i] >= correctness[i - 1],
                "ratio " + std::to_string(i + 1) + " below ratio " + std::to_string(i));
  }
  out.detail << "correctness at ratio 1..4:";
  for (double c : correctness) out.detail << ' ' << c;
}

std::vector<SweepRow> sweep_rows;

void buffer_sweep(Outcome& out) {
  const auto& tr = *e2e.trace;
  std::vector<std::size_t> caps;
  for (double pct : {1.0, 5.0, 10.0, 15.0, 20.0, 30.0}) {
    caps.push_back(static_cast<std::size_t>(pct / 100.0 * static_cast<double>(tr.unique_count())));
  }
  std::vector<Policy> policies{Policy::kLru, Policy::kLfu, Policy::kSrrip, Policy::kOptgen};
  sweep_rows = sweep(tr, policies, caps);
  auto rate = [&](Policy p, std::size_t cap) {
    for (const auto& r : sweep_rows) {
      if (r.policy == p && r.capacity == cap) return r.hit_rate;
    }
    return -1.0;
  };
  for (std::size_t i = 0; i < caps.size(); ++i) {
    out.require(rate(Policy::kOptgen, caps[i]) >= rate(Policy::kLru, caps[i]),
                "LRU beats optgen at " + std::to_string(caps[i]));
    if (i > 0) {
      for (auto p : {Policy::kLru, Policy::kOptgen}) {
        out.require(rate(p, caps[i]) >= rate(p, caps[i - 1]),
                    std::string(to_string(p)) + " drops at " + std::to_string(caps[i]));
      }
    }
  }
  out.detail << "capacity lru/optgen:";
  for (auto c : caps) out.detail << ' ' << c << '=' << rate(Policy::kLru, c) << '/' << rate(Policy::kOptgen, c);
}

void performance_model(Outcome& out) {
  CostModel cost;
  const double intercept = cost.latency_ms(0.0);
  const double slope = cost.latency_ms(1.0) - intercept;

  std::vector<PerfPoint> exact;
  for (int i = 0; i <= 10; ++i) exact.push_back({i / 10.0, cost.latency_ms(i / 10.0)});
  auto clean = fit(exact);
  out.require(clean.rmse <= 1e-9, "noiseless rmse " + std::to_string(clean.rmse));

  std::mt19937_64 rng(2009);
  std::uniform_real_distribution<double> h(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 2.0);
  std::vector<PerfPoint> noisy;
  for (int i = 0; i < 50; ++i) {
    double x = h(rng);
    noisy.push_back({x, cost.latency_ms(x) + noise(rng)});
  }
  auto m = fit(noisy);
  double ea = std::abs(m.intercept - intercept) / std::abs(intercept);
  double eb = std::abs(m.slope - slope) / std::abs(slope);
  out.require(ea <= 0.05 && eb <= 0.05, "planted line not recovered");
  out.require(m.rmse <= 6.0, "rmse above 3 sigma");

  // Rank the sweep's policies at the largest capacity.
  std::vector<SweepRow> column;
  for (const auto& r : sweep_rows) {
    if (!sweep_rows.empty() && r.capacity == sweep_rows.back().capacity) column.push_back(r);
  }
  out.require(column.size() == 4, "sweep column missing");
  std::size_t inversions = 0;
  for (const auto& a : column) {
    for (const auto& b : column) {
      if (a.hit_rate > b.hit_rate && estimate(m, a.hit_rate) > estimate(m, b.hit_rate)) ++inversions;
    }
  }
  out.require(inversions == 0, std::to_string(inversions) + " ranking inversions");
  out.detail << "planted (" << intercept << ", " << slope << ") fit (" << m.intercept << ", "
             << m.slope << ") rmse " << m.rmse << "; noiseless rmse " << clean.rmse
             << "; ranking over " << column.size() << " policies consistent";
}

void runtime_algebra(Outcome& out) {
  // Algorithm examples.
  PriorityBuffer buf(3);
  for (GlobalId id : {0, 1, 2}) buf.insert(id, 0, false);
  std::vector<GlobalId> t{0, 1, 2};
  std::vector<std::uint8_t> bits{1, 0, 1};
  load_embeddings(buf, t, bits, {});
  out.require(buf.priority(0) == 5 && buf.priority(1) == 4 && buf.priority(2) == 5,
              "load_embeddings priorities");
  out.require(gpu_buffer_populate(buf) == 1, "did not evict the middle entry");
  out.require(buf.snapshot() == std::vector<std::pair<GlobalId, int>>{{0, 4}, {2, 4}},
              "decay after eviction");
  PriorityBuffer zeros(3);
  for (GlobalId id : {3, 5, 8}) zeros.insert(id, 0, false);
  out.require(gpu_buffer_populate(zeros) == 3, "all-zero tie");
  out.require(zeros.snapshot() == std::vector<std::pair<GlobalId, int>>{{5, 0}, {8, 0}},
              "floor at zero");
  PriorityBuffer one(1);
  one.insert(7, 2, false);
  out.require(gpu_buffer_populate(one) == 7 && one.size() == 0, "single entry");
  PriorityBuffer resident(2);
  resident.insert(0, 5, false);
  resident.insert(1, 1, false);
  std::vector<GlobalId> again{0};
  load_embeddings(resident, {}, {}, again);
  out.require(resident.size() == 2 && resident.priority(0) == 4, "resident prefetch");

  // Extra replays at awkward capacities with oracle advisors.
  auto tr = generate_trace({{800, 400}, 8000, 1.1, 0.4, 8, 10});
  for (std::size_t cap : {1, 2, 5, 60, 400}) {
    ReplayConfig cfg{cap, 4, {}};
    logged_replay(tr, cfg, nullptr, nullptr);
    if (cap >= 2) {
      OptgenCachingOracle c(tr, cap);
      OptgenPrefetchOracle p(tr, cap, {});
      logged_replay(tr, cfg, &c, &p);
    }
  }

  std::size_t bad = 0;
  for (const auto& r : replay_log) {
    const auto& b = r.report;
    bool ok = b.cache_hits + b.prefetch_hits + b.on_demand == r.trace_length &&
              b.max_occupancy <= r.capacity && b.max_priority_after_load <= r.eviction_speed + 1;
    bad += !ok;
  }
  out.require(bad == 0, std::to_string(bad) + " replays break partition/occupancy/priority");
  out.detail << replay_log.size() << " replays partition exactly; algorithm examples hold";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "belady-optimality", belady_optimality},
      {2, "lru-reuse-distance", lru_reuse_crosscheck},
      {3, "gradient-check", gradient_correctness},
      {4, "chamfer-example", chamfer_example},
      {5, "chamfer-ablation", ablation},
      {6, "end-to-end", end_to_end},
      {7, "window-sensitivity", window_sensitivity},
      {8, "buffer-sweep", buffer_sweep},
      {9, "performance-model", performance_model},
      {10, "runtime-algebra", runtime_algebra},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome out;
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    failures += !out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " " << c.name << ": "
              << out.detail.str() << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
