#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = 0;
  std::string err;
};

class Workspace {
 public:
  Workspace() : dir_(fs::temp_directory_path() / "tiercache_test_cli") {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workspace() { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Run run(const std::string& args) const {
    std::string cmd = std::string(TIERCACHE_CLI) + " " + args + " > " + path("stdout") +
                      " 2> " + path("stderr");
    int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.err = read(path("stderr"));
    return r;
  }

  static std::string read(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

 private:
  fs::path dir_;
};

}  // namespace

TEST_CASE("gen is deterministic in its seed") {
  Workspace ws;
  const std::string args = "gen --tables 300,200 --accesses 3000 --zipf 1.1 --seed 7 --out ";
  REQUIRE(ws.run(args + ws.path("a.txt")).status == 0);
  REQUIRE(ws.run(args + ws.path("b.txt")).status == 0);
  auto a = Workspace::read(ws.path("a.txt"));
  CHECK(!a.empty());
  CHECK(a == Workspace::read(ws.path("b.txt")));
  REQUIRE(ws.run("gen --tables 300,200 --accesses 3000 --zipf 1.1 --seed 8 --out " +
                 ws.path("c.txt")).status == 0);
  CHECK(a != Workspace::read(ws.path("c.txt")));
}

TEST_CASE("sweep puts optgen on top at every capacity") {
  Workspace ws;
  REQUIRE(ws.run("gen --tables 2000 --accesses 20000 --stickiness 0.3 --seed 3 --out " +
                 ws.path("t.txt")).status == 0);
  REQUIRE(ws.run("sweep --trace " + ws.path("t.txt") +
                 " --policies lru,lfu,srrip,optgen --capacities 1%,5%,20%,64 --out " +
                 ws.path("s.csv")).status == 0);
  std::istringstream csv(Workspace::read(ws.path("s.csv")));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "policy,capacity,hits,hit_rate");
  std::map<std::string, std::map<std::string, long>> hits;
  while (std::getline(csv, line)) {
    std::stringstream row(line);
    std::string policy, cap, h;
    std::getline(row, policy, ',');
    std::getline(row, cap, ',');
    std::getline(row, h, ',');
    hits[cap][policy] = std::stol(h);
  }
  CHECK(hits.size() == 4);
  for (const auto& [cap, by_policy] : hits) {
    CAPTURE(cap);
    REQUIRE(by_policy.size() == 4);
    for (const auto& [policy, h] : by_policy) CHECK(by_policy.at("optgen") >= h);
  }
}

TEST_CASE("replay without a checkpoint is a missing-artifact error") {
  Workspace ws;
  REQUIRE(ws.run("gen --tables 100 --accesses 500 --out " + ws.path("t.txt")).status == 0);
  auto r = ws.run("replay --trace " + ws.path("t.txt") + " --capacity 20%");
  CHECK(r.status != 0);
  CHECK(r.err.rfind("error: missing-artifact: ", 0) == 0);
  auto absent = ws.run("replay --trace " + ws.path("t.txt") + " --caching " +
                       ws.path("none.ckpt"));
  CHECK(absent.status != 0);
  CHECK(absent.err.rfind("error: missing-artifact: ", 0) == 0);
}

TEST_CASE("errors carry a category") {
  Workspace ws;
  auto bad_flag = ws.run("sweep --bogus");
  CHECK(bad_flag.status != 0);
  CHECK(bad_flag.err.rfind("error: invalid-config: ", 0) == 0);

  std::ofstream(ws.path("bad.txt")) << "tables: 4\n0,9\n";
  auto bad_trace = ws.run("analyze --trace " + ws.path("bad.txt"));
  CHECK(bad_trace.status != 0);
  CHECK(bad_trace.err.rfind("error: validation: ", 0) == 0);
  CHECK(bad_trace.err.find("line 2") != std::string::npos);

  REQUIRE(ws.run("gen --tables 100 --accesses 500 --out " + ws.path("t.txt")).status == 0);
  auto zero = ws.run("sweep --trace " + ws.path("t.txt") + " --capacities 0%");
  CHECK(zero.err.rfind("error: invalid-config: ", 0) == 0);
}

TEST_CASE("a config file presets flags") {
  Workspace ws;
  std::ofstream(ws.path("run.toml")) << "[gen]\ntables = [50]\naccesses = 400\nseed = 5\n";
  REQUIRE(ws.run("--config " + ws.path("run.toml") + " gen --out " + ws.path("a.txt")).status ==
          0);
  REQUIRE(ws.run("gen --tables 50 --accesses 400 --seed 5 --out " + ws.path("b.txt")).status ==
          0);
  CHECK(Workspace::read(ws.path("a.txt")) == Workspace::read(ws.path("b.txt")));
}

TEST_CASE("label, train, replay and report chain together") {
  Workspace ws;
  REQUIRE(ws.run("gen --tables 400,200 --accesses 4000 --stickiness 0.4 --seed 2 --out " +
                 ws.path("t.txt")).status == 0);
  REQUIRE(ws.run("label --trace " + ws.path("t.txt") + " --capacity 20% --out " +
                 ws.path("d.txt")).status == 0);
  REQUIRE(ws.run("train --dataset " + ws.path("d.txt") + " --hidden 8 --embed-dim 6 --steps 5 "
                 "--out " + ws.path("c.ckpt")).status == 0);
  REQUIRE(ws.run("train --dataset " + ws.path("d.txt") + " --model prefetch --hidden 8 "
                 "--embed-dim 6 --steps 5 --out " + ws.path("p.ckpt")).status == 0);
  const std::string replay = "replay --trace " + ws.path("t.txt") + " --capacity 20% ";
  REQUIRE(ws.run(replay + "--caching " + ws.path("c.ckpt") + " --prefetch " + ws.path("p.ckpt") +
                 " --out " + ws.path("full.csv")).status == 0);
  REQUIRE(ws.run(replay + "--caching " + ws.path("c.ckpt") + " --prefetch " + ws.path("p.ckpt") +
                 " --out " + ws.path("again.csv")).status == 0);
  CHECK(Workspace::read(ws.path("full.csv")) == Workspace::read(ws.path("again.csv")));
  REQUIRE(ws.run(replay + "--policy lru --out " + ws.path("lru.csv")).status == 0);
  REQUIRE(ws.run("report --breakdown " + ws.path("full.csv") + "," + ws.path("lru.csv") +
                 " --out " + ws.path("r.csv")).status == 0);
  auto report = Workspace::read(ws.path("r.csv"));
  CHECK(report.rfind("policy,capacity,cache_hits,prefetch_hits,on_demand,correctness,coverage,"
                     "hit_rate,est_latency_ms\n", 0) == 0);
  CHECK(report.find("\nlru,") != std::string::npos);

  auto other = ws.run("gen --tables 401,200 --accesses 4000 --out " + ws.path("u.txt"));
  REQUIRE(other.status == 0);
  auto mismatch = ws.run("replay --trace " + ws.path("u.txt") + " --caching " + ws.path("c.ckpt"));
  CHECK(mismatch.err.rfind("error: vocabulary-mismatch: ", 0) == 0);
}
