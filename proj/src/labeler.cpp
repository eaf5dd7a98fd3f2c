#include "tiercache/labeler.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "tiercache/error.hpp"

namespace tiercache {

std::size_t optgen_label_capacity(std::size_t gpu_capacity) {
  std::size_t cap = gpu_capacity * 4 / 5;
  if (cap < 1) {
    throw Error(ErrorKind::kInvalidConfig,
                "buffer capacity " + std::to_string(gpu_capacity) + " leaves no optgen capacity");
  }
  return cap;
}

namespace {

void check_alignment(const Trace& trace, const SequenceSample& s) {
  if (s.origin + s.input.size() + s.window.size() > trace.size()) {
    throw Error(ErrorKind::kValidation, "sample at origin " + std::to_string(s.origin) +
                                            " runs past the end of the trace");
  }
}

void apply_caching(const SimResult& opt, SequenceSample& s) {
  std::vector<std::uint8_t> labels(s.input.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = opt.keep_decisions[s.origin + i];
  s.cache_labels = std::move(labels);
}

// False when the window has no miss.
bool apply_prefetch(const Trace& trace, const SimResult& opt, const ChunkShape& shape,
                    SequenceSample& s) {
  std::vector<EmbeddingIndex> targets;
  const std::size_t start = s.origin + s.input.size();
  for (std::size_t k = 0; k < s.window.size() && targets.size() < shape.output_length; ++k) {
    if (!opt.per_access_hit[start + k]) targets.push_back(trace.accesses()[start + k]);
  }
  if (targets.empty()) return false;
  while (targets.size() < shape.output_length) targets.push_back(targets.back());
  s.prefetch_targets = std::move(targets);
  return true;
}

}  // namespace

LabeledDataset label_caching(const Trace& trace, std::vector<SequenceSample> samples,
                             const ChunkShape& shape, std::size_t gpu_capacity) {
  LabeledDataset ds;
  ds.label_capacity = optgen_label_capacity(gpu_capacity);
  ds.vocabulary = trace.vocabulary();
  ds.shape = shape;
  auto opt = simulate_optgen(trace, ds.label_capacity);
  for (auto& s : samples) {
    check_alignment(trace, s);
    apply_caching(opt, s);
  }
  ds.samples = std::move(samples);
  return ds;
}

LabeledDataset label_prefetch(const Trace& trace, std::vector<SequenceSample> samples,
                              const ChunkShape& shape, std::size_t gpu_capacity) {
  LabeledDataset ds;
  ds.label_capacity = optgen_label_capacity(gpu_capacity);
  ds.vocabulary = trace.vocabulary();
  ds.shape = shape;
  auto opt = simulate_optgen(trace, ds.label_capacity);
  for (auto& s : samples) {
    check_alignment(trace, s);
    if (apply_prefetch(trace, opt, shape, s)) {
      ds.samples.push_back(std::move(s));
    } else {
      ++ds.dropped;
    }
  }
  return ds;
}

LabeledDataset label_dataset(const Trace& trace, std::vector<SequenceSample> samples,
                             const ChunkShape& shape, std::size_t gpu_capacity) {
  LabeledDataset ds;
  ds.label_capacity = optgen_label_capacity(gpu_capacity);
  ds.vocabulary = trace.vocabulary();
  ds.shape = shape;
  auto opt = simulate_optgen(trace, ds.label_capacity);
  for (auto& s : samples) {
    check_alignment(trace, s);
    apply_caching(opt, s);
    if (!apply_prefetch(trace, opt, shape, s)) ++ds.dropped;
  }
  ds.samples = std::move(samples);
  return ds;
}

LabeledDataset prefetch_subset(const LabeledDataset& dataset) {
  LabeledDataset out = dataset;
  out.samples.clear();
  for (const auto& s : dataset.samples) {
    if (s.prefetch_targets) out.samples.push_back(s);
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& dataset,
                                                        SplitMode mode,
                                                        double validation_fraction) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorKind::kInvalidConfig, "validation fraction must be in [0,1)");
  }
  LabeledDataset train = dataset, valid = dataset;
  train.samples.clear();
  valid.samples.clear();
  const std::size_t n = dataset.samples.size();
  const auto n_valid =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * validation_fraction));
  for (std::size_t i = 0; i < n; ++i) {
    bool to_valid = mode == SplitMode::kParity ? (i % 2 == 1) : (i >= n - n_valid);
    (to_valid ? valid : train).samples.push_back(dataset.samples[i]);
  }
  return {std::move(train), std::move(valid)};
}

namespace {

void write_ids(std::ostream& out, const std::vector<EmbeddingIndex>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out << ' ';
    out << ids[i].table_id << ':' << ids[i].row_id;
  }
}

Error bad_line(std::size_t line, const std::string& what) {
  return Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_number(std::string_view text, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw bad_line(line, "bad number '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<EmbeddingIndex> parse_ids(std::string_view text, const Vocabulary& vocab,
                                      std::size_t line) {
  std::vector<EmbeddingIndex> ids;
  if (text.empty()) return ids;
  for (auto item : split(text, ' ')) {
    auto colon = item.find(':');
    if (colon == std::string_view::npos) throw bad_line(line, "expected table:row");
    auto table = parse_number<std::uint32_t>(item.substr(0, colon), line);
    auto row = parse_number<std::uint64_t>(item.substr(colon + 1), line);
    try {
      ids.push_back(vocab.index(table, row));
    } catch (const Error& e) {
      throw Error(ErrorKind::kValidation, "line " + std::to_string(line) + ": " + e.what());
    }
  }
  return ids;
}

std::string_view header_value(const std::string& line, std::string_view key, std::size_t no) {
  if (line.rfind(key, 0) != 0) throw bad_line(no, "expected '" + std::string(key) + "'");
  std::string_view v(line);
  v.remove_prefix(key.size());
  while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
  return v;
}

}  // namespace

void write_dataset(const LabeledDataset& ds, std::ostream& out) {
  out << "tables: ";
  const auto& sizes = ds.vocabulary.table_sizes();
  for (std::size_t i = 0; i < sizes.size(); ++i) out << (i ? "," : "") << sizes[i];
  out << "\nlabel_capacity: " << ds.label_capacity << "\nshape: " << ds.shape.input_length << ','
      << ds.shape.output_length << ',' << ds.shape.window_ratio << "\ndropped: " << ds.dropped
      << '\n';
  for (const auto& s : ds.samples) {
    out << s.origin << '|';
    write_ids(out, s.input);
    out << '|';
    if (s.cache_labels) {
      for (std::size_t i = 0; i < s.cache_labels->size(); ++i) {
        out << (i ? " " : "") << static_cast<int>((*s.cache_labels)[i]);
      }
    } else {
      out << '-';
    }
    out << '|';
    if (s.prefetch_targets) write_ids(out, *s.prefetch_targets); else out << '-';
    out << '|';
    write_ids(out, s.window);
    out << '\n';
  }
}

void write_dataset(const LabeledDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_dataset(dataset, out);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

LabeledDataset read_dataset(std::istream& in) {
  LabeledDataset ds;
  std::string line;
  std::size_t no = 0;
  auto next_header = [&](std::string_view key) {
    ++no;
    if (!std::getline(in, line)) throw bad_line(no, "truncated header");
    return header_value(line, key, no);
  };
  {
    std::vector<std::uint64_t> sizes;
    for (auto part : split(next_header("tables:"), ',')) {
      sizes.push_back(parse_number<std::uint64_t>(part, no));
    }
    ds.vocabulary = Vocabulary(std::move(sizes));
  }
  ds.label_capacity = parse_number<std::size_t>(next_header("label_capacity:"), no);
  {
    auto parts = split(next_header("shape:"), ',');
    if (parts.size() != 3) throw bad_line(no, "shape needs three fields");
    ds.shape.input_length = parse_number<std::size_t>(parts[0], no);
    ds.shape.output_length = parse_number<std::size_t>(parts[1], no);
    ds.shape.window_ratio = parse_number<std::size_t>(parts[2], no);
  }
  ds.dropped = parse_number<std::size_t>(next_header("dropped:"), no);

  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    auto fields = split(line, '|');
    if (fields.size() != 5) throw bad_line(no, "expected 5 '|'-separated fields");
    SequenceSample s;
    s.origin = parse_number<std::size_t>(fields[0], no);
    s.input = parse_ids(fields[1], ds.vocabulary, no);
    if (fields[2] != "-") {
      std::vector<std::uint8_t> labels;
      for (auto bit : split(fields[2], ' ')) {
        auto v = parse_number<unsigned>(bit, no);
        if (v > 1) throw bad_line(no, "labels must be 0 or 1");
        labels.push_back(static_cast<std::uint8_t>(v));
      }
      if (labels.size() != s.input.size()) throw bad_line(no, "label count differs from input");
      s.cache_labels = std::move(labels);
    }
    if (fields[3] != "-") s.prefetch_targets = parse_ids(fields[3], ds.vocabulary, no);
    s.window = parse_ids(fields[4], ds.vocabulary, no);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

LabeledDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "cannot open dataset " + path.string());
  return read_dataset(in);
}

}  // namespace tiercache
