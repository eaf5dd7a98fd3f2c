#include "tiercache/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>

#include "tiercache/error.hpp"

namespace tiercache {

Vocabulary::Vocabulary(std::vector<std::uint64_t> table_sizes)
    : table_sizes_(std::move(table_sizes)) {
  offsets_.reserve(table_sizes_.size());
  for (auto size : table_sizes_) {
    offsets_.push_back(total_);
    total_ += size;
  }
}

EmbeddingIndex Vocabulary::index(std::uint32_t table_id, std::uint64_t row_id) const {
  if (table_id >= table_sizes_.size()) {
    throw Error(ErrorKind::kValidation,
                "table_id " + std::to_string(table_id) + " out of range (" +
                    std::to_string(table_sizes_.size()) + " tables)");
  }
  if (row_id >= table_sizes_[table_id]) {
    throw Error(ErrorKind::kValidation,
                "row_id " + std::to_string(row_id) + " out of range for table " +
                    std::to_string(table_id) + " of size " +
                    std::to_string(table_sizes_[table_id]));
  }
  return {table_id, row_id, offsets_[table_id] + row_id};
}

EmbeddingIndex Vocabulary::from_global(GlobalId global_id) const {
  if (global_id >= total_) {
    throw Error(ErrorKind::kValidation,
                "global_id " + std::to_string(global_id) + " out of range");
  }
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), global_id);
  auto table = static_cast<std::size_t>(std::distance(offsets_.begin(), it)) - 1;
  // Skip zero-sized tables that share an offset with the next one.
  while (table_sizes_[table] == 0) --table;
  return {static_cast<std::uint32_t>(table), global_id - offsets_[table], global_id};
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(table_sizes_.size());
  for (auto size : table_sizes_) mix(size);
  return h;
}

Trace::Trace(Vocabulary vocabulary, std::vector<EmbeddingIndex> accesses)
    : vocabulary_(std::move(vocabulary)), accesses_(std::move(accesses)) {
  ids_.reserve(accesses_.size());
  std::unordered_set<GlobalId> seen;
  for (auto& a : accesses_) {
    auto checked = vocabulary_.index(a.table_id, a.row_id);
    if (a.global_id != checked.global_id) {
      throw Error(ErrorKind::kValidation, "global_id inconsistent with (table_id, row_id)");
    }
    ids_.push_back(a.global_id);
    seen.insert(a.global_id);
  }
  unique_count_ = seen.size();
}

Trace Trace::from_global_ids(Vocabulary vocabulary, std::span<const GlobalId> ids) {
  std::vector<EmbeddingIndex> accesses;
  accesses.reserve(ids.size());
  for (auto id : ids) accesses.push_back(vocabulary.from_global(id));
  return Trace(std::move(vocabulary), std::move(accesses));
}

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

class ZipfSampler {
 public:
  ZipfSampler(std::uint64_t n, double exponent) : cdf_(n) {
    double sum = 0.0;
    for (std::uint64_t r = 0; r < n; ++r) {
      sum += std::pow(static_cast<double>(r + 1), -exponent);
      cdf_[r] = sum;
    }
    for (auto& c : cdf_) c /= sum;
  }

  std::uint64_t operator()(double u) const {
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    auto rank = static_cast<std::uint64_t>(std::distance(cdf_.begin(), it));
    return std::min<std::uint64_t>(rank, cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

Trace generate_trace(const TraceGenConfig& cfg) {
  if (cfg.table_sizes.empty()) throw Error(ErrorKind::kInvalidConfig, "no tables");
  if (cfg.total_accesses == 0) throw Error(ErrorKind::kInvalidConfig, "zero accesses");
  for (auto size : cfg.table_sizes) {
    if (size == 0) throw Error(ErrorKind::kInvalidConfig, "table of size 0");
  }
  if (!(cfg.zipf_exponent >= 0.0) || !std::isfinite(cfg.zipf_exponent)) {
    throw Error(ErrorKind::kInvalidConfig, "zipf exponent must be >= 0");
  }
  if (!(cfg.markov_stickiness >= 0.0 && cfg.markov_stickiness <= 1.0)) {
    throw Error(ErrorKind::kInvalidConfig, "markov stickiness must be in [0,1]");
  }
  if (cfg.markov_stickiness > 0.0 && cfg.correlation_pool_size == 0) {
    throw Error(ErrorKind::kInvalidConfig, "correlation pool size must be positive");
  }

  Vocabulary vocab(cfg.table_sizes);
  ZipfSampler zipf(vocab.total(), cfg.zipf_exponent);
  std::mt19937_64 rng(cfg.rng_seed);

  // Most-recent-first list of the last `correlation_pool_size` distinct ids.
  std::vector<GlobalId> pool;
  std::vector<GlobalId> ids;
  ids.reserve(cfg.total_accesses);
  for (std::size_t i = 0; i < cfg.total_accesses; ++i) {
    GlobalId id;
    if (!pool.empty() && unit_uniform(rng) < cfg.markov_stickiness) {
      id = pool[rng() % pool.size()];
    } else {
      id = zipf(unit_uniform(rng));
    }
    ids.push_back(id);
    if (cfg.correlation_pool_size > 0) {
      auto it = std::find(pool.begin(), pool.end(), id);
      if (it != pool.end()) {
        std::rotate(pool.begin(), it, it + 1);
      } else {
        pool.insert(pool.begin(), id);
        if (pool.size() > cfg.correlation_pool_size) pool.pop_back();
      }
    }
  }
  return Trace::from_global_ids(std::move(vocab), ids);
}

namespace {

template <typename T>
bool parse_uint(std::string_view text, T& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

Error parse_error(std::size_t line, const std::string& what) {
  return Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

Trace read_trace(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw parse_error(1, "missing 'tables:' header");
  constexpr std::string_view kHeader = "tables:";
  if (line.rfind(kHeader, 0) != 0) throw parse_error(1, "missing 'tables:' header");

  std::vector<std::uint64_t> sizes;
  std::string_view rest = std::string_view(line).substr(kHeader.size());
  while (!rest.empty()) {
    auto comma = rest.find(',');
    std::uint64_t size = 0;
    if (!parse_uint(rest.substr(0, comma), size)) throw parse_error(1, "bad table size");
    sizes.push_back(size);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (sizes.empty()) throw parse_error(1, "no tables declared");
  Vocabulary vocab(std::move(sizes));

  std::vector<EmbeddingIndex> accesses;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (view.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto comma = view.find(',');
    std::uint32_t table = 0;
    std::uint64_t row = 0;
    if (comma == std::string_view::npos || !parse_uint(view.substr(0, comma), table) ||
        !parse_uint(view.substr(comma + 1), row)) {
      throw parse_error(line_no, "expected 'table_id,row_id', got '" + line + "'");
    }
    try {
      accesses.push_back(vocab.index(table, row));
    } catch (const Error& e) {
      throw Error(ErrorKind::kValidation, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Trace(std::move(vocab), std::move(accesses));
}

Trace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return read_trace(in);
}

void write_trace(const Trace& trace, std::ostream& out) {
  out << "tables: ";
  const auto& sizes = trace.vocabulary().table_sizes();
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) out << ',';
    out << sizes[i];
  }
  out << '\n';
  for (const auto& a : trace.accesses()) out << a.table_id << ',' << a.row_id << '\n';
}

void write_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_trace(trace, out);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<SequenceSample> chunk(const Trace& trace, const ChunkShape& shape) {
  if (shape.input_length == 0 || shape.output_length == 0 || shape.window_ratio == 0) {
    throw Error(ErrorKind::kInvalidConfig, "chunk lengths and window ratio must be >= 1");
  }
  const auto& acc = trace.accesses();
  const std::size_t win = shape.window_length();
  std::vector<SequenceSample> samples;
  for (std::size_t origin = 0; origin + shape.input_length + win <= acc.size();
       origin += shape.input_length) {
    SequenceSample s;
    s.origin = origin;
    auto first = acc.begin() + static_cast<std::ptrdiff_t>(origin);
    auto split = first + static_cast<std::ptrdiff_t>(shape.input_length);
    s.input.assign(first, split);
    s.window.assign(split, split + static_cast<std::ptrdiff_t>(win));
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace tiercache
