// tiercache command line: trace generation, analysis, baseline sweeps,
// labeling, training, replay and reporting.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tiercache/analysis.hpp"
#include "tiercache/cache_sim.hpp"
#include "tiercache/error.hpp"
#include "tiercache/labeler.hpp"
#include "tiercache/nn/checkpoint.hpp"
#include "tiercache/nn/train.hpp"
#include "tiercache/perf.hpp"
#include "tiercache/runtime.hpp"

namespace tc = tiercache;

namespace {

// "N" is an absolute slot count, "P%" a percentage of the trace's unique ids.
std::size_t resolve_capacity(const std::string& text, const tc::Trace& trace) {
  if (text.empty()) throw tc::Error(tc::ErrorKind::kInvalidConfig, "empty capacity");
  const bool percent = text.back() == '%';
  const std::string number = percent ? text.substr(0, text.size() - 1) : text;
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(number, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != number.size() || number.empty() || !(value >= 0.0)) {
    throw tc::Error(tc::ErrorKind::kInvalidConfig, "bad capacity '" + text + "'");
  }
  double slots = percent ? value / 100.0 * static_cast<double>(trace.unique_count()) : value;
  if (!percent && slots != std::floor(slots)) {
    throw tc::Error(tc::ErrorKind::kInvalidConfig, "capacity '" + text + "' is not whole");
  }
  auto cap = static_cast<std::size_t>(std::floor(slots));
  if (cap < 1) {
    throw tc::Error(tc::ErrorKind::kInvalidConfig, "capacity '" + text + "' resolves to 0 slots");
  }
  return cap;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw tc::Error(tc::ErrorKind::kIo, "cannot write " + path);
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

struct ShapeFlags {
  std::size_t input_length = 15;
  std::size_t output_length = 5;
  std::size_t window_ratio = 3;

  void attach(CLI::App* cmd) {
    cmd->add_option("--input-length", input_length, "accesses per chunk")->capture_default_str();
    cmd->add_option("--output-length", output_length, "prefetch slots per chunk")
        ->capture_default_str();
    cmd->add_option("--window-ratio", window_ratio, "evaluation window / output length")
        ->capture_default_str();
  }
  tc::ChunkShape shape() const { return {input_length, output_length, window_ratio}; }
};

// ---- gen --------------------------------------------------------------------

struct GenFlags {
  std::vector<std::uint64_t> tables{10000};
  std::size_t accesses = 100000;
  double zipf = 1.2;
  double stickiness = 0.0;
  std::size_t pool = 8;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_gen(const GenFlags& f) {
  tc::TraceGenConfig cfg{f.tables, f.accesses, f.zipf, f.stickiness, f.pool, f.seed};
  auto trace = tc::generate_trace(cfg);
  tc::write_trace(trace, f.out);
  std::cout << "wrote " << trace.size() << " accesses (" << trace.unique_count()
            << " unique) to " << f.out << '\n';
}

// ---- analyze ----------------------------------------------------------------

struct AnalyzeFlags {
  std::string trace;
  std::string histogram;
  std::string cdf;
};

void cmd_analyze(const AnalyzeFlags& f) {
  auto trace = tc::read_trace(f.trace);
  auto report = tc::reuse_distances(trace);
  auto cdf = tc::frequency_cdf(trace);
  if (!f.histogram.empty()) {
    auto out = open_out(f.histogram);
    tc::write_histogram_csv(report, out);
  }
  if (!f.cdf.empty()) {
    auto out = open_out(f.cdf);
    tc::write_cdf_csv(cdf, out);
  }
  std::cout << "accesses " << trace.size() << "\nunique " << trace.unique_count() << "\ncold "
            << report.cold_count << "\ntop20_share " << tc::top_share(cdf, 0.2) << '\n';
}

// ---- sweep ------------------------------------------------------------------

struct SweepFlags {
  std::string trace;
  std::vector<std::string> policies{"lru", "lfu", "srrip", "optgen"};
  std::vector<std::string> capacities{"1%", "5%", "10%", "15%", "20%", "30%"};
  std::size_t ways = 0;
  std::string out;
};

void cmd_sweep(const SweepFlags& f) {
  auto trace = tc::read_trace(f.trace);
  std::vector<tc::Policy> policies;
  for (const auto& p : f.policies) policies.push_back(tc::parse_policy(p));
  std::vector<std::size_t> caps;
  for (const auto& c : f.capacities) caps.push_back(resolve_capacity(c, trace));
  auto rows = tc::sweep(trace, policies, caps, f.ways);
  if (f.out.empty()) {
    tc::write_sweep_csv(rows, std::cout);
  } else {
    auto out = open_out(f.out);
    tc::write_sweep_csv(rows, out);
  }
}

// ---- label ------------------------------------------------------------------

struct LabelFlags {
  std::string trace;
  std::string capacity = "20%";
  ShapeFlags shape;
  std::string out;
};

void cmd_label(const LabelFlags& f) {
  auto trace = tc::read_trace(f.trace);
  auto shape = f.shape.shape();
  auto cap = resolve_capacity(f.capacity, trace);
  auto ds = tc::label_dataset(trace, tc::chunk(trace, shape), shape, cap);
  tc::write_dataset(ds, f.out);
  std::cout << "labeled " << ds.samples.size() << " samples at optgen capacity "
            << ds.label_capacity << " (" << ds.dropped << " without window misses)\n";
}

// ---- train ------------------------------------------------------------------

struct TrainFlags {
  std::string dataset;
  std::string model = "caching";
  std::string loss;
  double alpha = 0.7;
  std::size_t embed_dim = 16;
  std::size_t table_dim = 4;
  std::size_t hidden = 32;
  std::size_t stacks = 0;
  double init_scale = 0.08;
  tc::nn::TrainConfig cfg;
  std::string out;
  std::string curve;
};

void cmd_train(const TrainFlags& f) {
  auto ds = tc::read_dataset(f.dataset);
  auto kind = tc::nn::parse_model_kind(f.model);
  auto shape = tc::nn::default_shape(kind);
  shape.embed_dim = f.embed_dim;
  shape.table_dim = f.table_dim;
  shape.hidden = f.hidden;
  if (f.stacks != 0) shape.stacks = f.stacks;
  shape.input_length = ds.shape.input_length;
  shape.output_length = ds.shape.output_length;

  tc::nn::LossConfig loss;
  loss.alpha = f.alpha;
  loss.window_ratio = ds.shape.window_ratio;
  if (f.loss.empty()) {
    loss.kind = kind == tc::nn::ModelKind::kCaching ? tc::nn::LossKind::kCrossEntropy
                                                    : tc::nn::LossKind::kChamfer2;
  } else {
    loss.kind = tc::nn::parse_loss_kind(f.loss);
  }

  auto init = tc::nn::make_model(shape, ds.vocabulary, f.cfg.seed, f.init_scale);
  if (kind == tc::nn::ModelKind::kPrefetch) ds = tc::prefetch_subset(ds);
  auto result = tc::nn::train(ds, std::move(init), f.cfg, loss);
  tc::nn::save_checkpoint(result.params, f.out);

  if (!f.curve.empty()) {
    auto out = open_out(f.curve);
    out << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
      out << i + 1 << ',' << result.loss_curve[i] << '\n';
    }
  }
  if (result.gradient_check) {
    const auto& g = *result.gradient_check;
    std::cout << "gradient check: max rel error " << g.max_relative_error << " at "
              << g.worst_parameter << " (" << g.checked << " checked, " << g.excluded
              << " excluded)\n";
  }
  for (const auto& v : result.validation) {
    std::cout << "step " << v.step << " val_loss " << v.loss << " val_metric " << v.metric
              << '\n';
  }
  if (!result.loss_curve.empty()) {
    std::cout << "final train loss " << result.loss_curve.back() << " after "
              << result.loss_curve.size() << " steps\n";
  }
  if (result.diverged) {
    throw tc::Error(tc::ErrorKind::kNonFinite,
                    result.message + "; last good parameters saved to " + f.out);
  }
}

// ---- replay -----------------------------------------------------------------

struct ReplayFlags {
  std::string trace;
  std::string capacity = "20%";
  int eviction_speed = 4;
  ShapeFlags shape;
  std::string caching;
  std::string prefetch;
  std::string policy;
  std::string label;
  std::string out;
};

tc::BreakdownReport run_replay(const ReplayFlags& f) {
  auto trace = tc::read_trace(f.trace);
  auto shape = f.shape.shape();
  auto cap = resolve_capacity(f.capacity, trace);

  std::optional<tc::nn::ModelParameters> pf_model;
  std::unique_ptr<tc::PrefetchAdvisor> prefetch;
  if (f.prefetch == "optgen") {
    prefetch = std::make_unique<tc::OptgenPrefetchOracle>(trace, cap, shape);
  } else if (!f.prefetch.empty()) {
    pf_model = tc::nn::load_checkpoint(f.prefetch, trace.vocabulary());
    prefetch = std::make_unique<tc::ModelPrefetchAdvisor>(*pf_model);
  }

  if (!f.policy.empty()) {
    auto report =
        tc::replay_policy_only(trace, {cap, 0, tc::parse_policy(f.policy), 3}, shape, prefetch.get());
    if (!f.label.empty()) report.label = f.label;
    return report;
  }

  if (f.caching.empty()) {
    throw tc::Error(tc::ErrorKind::kMissingArtifact,
                    "replay needs a caching checkpoint (--caching PATH, or optgen) or --policy");
  }
  std::optional<tc::nn::ModelParameters> cache_model;
  std::unique_ptr<tc::CachingAdvisor> caching;
  if (f.caching == "optgen") {
    caching = std::make_unique<tc::OptgenCachingOracle>(trace, cap);
  } else {
    cache_model = tc::nn::load_checkpoint(f.caching, trace.vocabulary());
    caching = std::make_unique<tc::ModelCachingAdvisor>(*cache_model);
  }
  auto report = tc::replay(trace, {cap, f.eviction_speed, shape}, caching.get(), prefetch.get());
  report.label = f.label.empty() ? (prefetch ? "model+prefetch" : "model") : f.label;
  return report;
}

void cmd_replay(const ReplayFlags& f) {
  auto report = run_replay(f);
  std::vector<tc::BreakdownReport> reports{report};
  if (f.out.empty()) {
    tc::write_breakdown_csv(reports, std::cout);
  } else {
    auto out = open_out(f.out);
    tc::write_breakdown_csv(reports, out);
  }
  std::cerr << report.label << ": hit rate " << report.hit_rate() << ", on-demand "
            << report.on_demand << " of " << report.total << '\n';
}

// ---- report -----------------------------------------------------------------

struct ReportFlags {
  std::vector<std::string> breakdowns;
  std::string points;
  tc::CostModel cost;
  std::string fit_out;
  std::string out;
};

struct ReportRow {
  std::vector<std::string> cells;
  double hit_rate = 0.0;
};

std::vector<tc::PerfPoint> read_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tc::Error(tc::ErrorKind::kMissingArtifact, "cannot read " + path);
  std::vector<tc::PerfPoint> points;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 || line.empty()) continue;
    auto cells = split(line, ',');
    try {
      if (cells.size() != 2) throw std::invalid_argument("columns");
      points.push_back({std::stod(cells[0]), std::stod(cells[1])});
    } catch (const std::exception&) {
      throw tc::Error(tc::ErrorKind::kParse,
                      path + " line " + std::to_string(number) + ": expected hit_rate,latency_ms");
    }
  }
  return points;
}

void cmd_report(const ReportFlags& f) {
  std::vector<std::string> header;
  std::vector<ReportRow> rows;
  for (const auto& path : f.breakdowns) {
    std::ifstream in(path);
    if (!in) throw tc::Error(tc::ErrorKind::kMissingArtifact, "cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw tc::Error(tc::ErrorKind::kParse, path + ": empty file");
    auto cols = split(line, ',');
    if (cols.size() < 7 || cols[0] != "policy" || cols[4] != "on_demand") {
      throw tc::Error(tc::ErrorKind::kParse, path + " line 1: not a breakdown table");
    }
    cols.resize(7);
    if (header.empty()) header = cols;
    std::size_t number = 1;
    while (std::getline(in, line)) {
      ++number;
      if (line.empty()) continue;
      auto cells = split(line, ',');
      if (cells.size() < 7) {
        throw tc::Error(tc::ErrorKind::kParse, path + " line " + std::to_string(number));
      }
      cells.resize(7);
      ReportRow row;
      try {
        double cache = std::stod(cells[2]), pf = std::stod(cells[3]), od = std::stod(cells[4]);
        row.hit_rate = cache + pf + od > 0 ? (cache + pf) / (cache + pf + od) : 0.0;
      } catch (const std::exception&) {
        throw tc::Error(tc::ErrorKind::kParse, path + " line " + std::to_string(number));
      }
      row.cells = std::move(cells);
      rows.push_back(std::move(row));
    }
  }

  std::vector<tc::PerfPoint> points;
  if (!f.points.empty()) {
    points = read_points(f.points);
  } else {
    for (int i = 0; i <= 10; ++i) {
      double h = i / 10.0;
      points.push_back({h, f.cost.latency_ms(h)});
    }
  }
  auto model = tc::fit(points);
  if (!f.fit_out.empty()) {
    auto out = open_out(f.fit_out);
    tc::write_fit_csv(model, out);
  }

  auto emit = [&](std::ostream& out) {
    for (const auto& h : header) out << h << ',';
    out << "hit_rate,est_latency_ms\n";
    for (const auto& r : rows) {
      for (const auto& c : r.cells) out << c << ',';
      out << r.hit_rate << ',' << tc::estimate(model, r.hit_rate) << '\n';
    }
  };
  if (f.out.empty()) {
    emit(std::cout);
  } else {
    auto out = open_out(f.out);
    emit(out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tiercache: learned placement for a tiered embedding buffer"};
  app.set_config("--config", "", "TOML/INI file presetting any flag");
  app.require_subcommand(1);

  GenFlags gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic embedding access trace");
  g->add_option("--tables", gen.tables, "rows per table")->delimiter(',')->capture_default_str();
  g->add_option("--accesses", gen.accesses)->capture_default_str();
  g->add_option("--zipf", gen.zipf, "Zipf exponent, 0 = uniform")->capture_default_str();
  g->add_option("--stickiness", gen.stickiness, "probability of a correlated repeat")
      ->capture_default_str();
  g->add_option("--pool", gen.pool, "recent ids eligible for repeats")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out)->required();

  AnalyzeFlags analyze;
  auto* a = app.add_subcommand("analyze", "reuse distances and access-frequency CDF");
  a->add_option("--trace", analyze.trace)->required();
  a->add_option("--histogram", analyze.histogram, "reuse histogram CSV");
  a->add_option("--cdf", analyze.cdf, "frequency CDF CSV");

  SweepFlags sw;
  auto* s = app.add_subcommand("sweep", "hit rates per policy and capacity");
  s->add_option("--trace", sw.trace)->required();
  s->add_option("--policies", sw.policies)->delimiter(',')->capture_default_str();
  s->add_option("--capacities", sw.capacities, "slots or percent of unique ids")
      ->delimiter(',')
      ->capture_default_str();
  s->add_option("--ways", sw.ways, "0 = fully associative")->capture_default_str();
  s->add_option("--out", sw.out);

  LabelFlags label;
  auto* l = app.add_subcommand("label", "chunk a trace and attach optgen labels");
  l->add_option("--trace", label.trace)->required();
  l->add_option("--capacity", label.capacity, "buffer slots or percent of unique ids")
      ->capture_default_str();
  label.shape.attach(l);
  l->add_option("--out", label.out)->required();

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "train a caching or prefetch model");
  t->add_option("--dataset", tr.dataset)->required();
  t->add_option("--model", tr.model, "caching or prefetch")->capture_default_str();
  t->add_option("--loss", tr.loss, "cross-entropy, chamfer2 or chamfer1");
  t->add_option("--alpha", tr.alpha)->capture_default_str();
  t->add_option("--embed-dim", tr.embed_dim)->capture_default_str();
  t->add_option("--table-dim", tr.table_dim)->capture_default_str();
  t->add_option("--hidden", tr.hidden)->capture_default_str();
  t->add_option("--stacks", tr.stacks, "0 = model default");
  t->add_option("--init-scale", tr.init_scale)->capture_default_str();
  t->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
  t->add_option("--batch", tr.cfg.batch_size)->capture_default_str();
  t->add_option("--steps", tr.cfg.max_steps)->capture_default_str();
  t->add_option("--seed", tr.cfg.seed)->capture_default_str();
  t->add_option("--validation", tr.cfg.validation_fraction)->capture_default_str();
  t->add_option("--eval-every", tr.cfg.eval_every, "0 = once per epoch");
  t->add_flag("--grad-check", tr.cfg.gradient_check);
  t->add_option("--out", tr.out)->required();
  t->add_option("--curve", tr.curve, "loss curve CSV");

  ReplayFlags rp;
  auto* r = app.add_subcommand("replay", "replay a trace through the buffer");
  r->add_option("--trace", rp.trace)->required();
  r->add_option("--capacity", rp.capacity)->capture_default_str();
  r->add_option("--eviction-speed", rp.eviction_speed)->capture_default_str();
  rp.shape.attach(r);
  r->add_option("--caching", rp.caching, "caching checkpoint, or optgen");
  r->add_option("--prefetch", rp.prefetch, "prefetch checkpoint, or optgen");
  r->add_option("--policy", rp.policy, "run a baseline policy instead of the priority buffer");
  r->add_option("--label", rp.label);
  r->add_option("--out", rp.out);

  ReportFlags rep;
  auto* p = app.add_subcommand("report", "merge breakdowns with latency estimates");
  p->add_option("--breakdown", rep.breakdowns)->delimiter(',')->required();
  p->add_option("--points", rep.points, "hit_rate,latency_ms CSV to fit");
  p->add_option("--hit-cost-us", rep.cost.hit_cost_us)->capture_default_str();
  p->add_option("--miss-cost-us", rep.cost.miss_cost_us)->capture_default_str();
  p->add_option("--accesses-per-inference", rep.cost.accesses_per_inference)
      ->capture_default_str();
  p->add_option("--fit-out", rep.fit_out);
  p->add_option("--out", rep.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << tc::to_string(tc::ErrorKind::kInvalidConfig) << ": " << e.what()
              << '\n';
    return 2;
  }

  try {
    if (*g) cmd_gen(gen);
    if (*a) cmd_analyze(analyze);
    if (*s) cmd_sweep(sw);
    if (*l) cmd_label(label);
    if (*t) cmd_train(tr);
    if (*r) cmd_replay(rp);
    if (*p) cmd_report(rep);
  } catch (const tc::Error& e) {
    std::cerr << "error: " << tc::to_string(e.kind()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
