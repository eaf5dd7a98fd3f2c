#include "tiercache/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "tiercache/error.hpp"

namespace tiercache::nn {

namespace {

constexpr std::string_view kMagic = "tiercache-checkpoint 1";

Error corrupt(const std::string& what) {
  return Error(ErrorKind::kParse, "checkpoint: " + what);
}

std::string read_line(std::istream& in, std::string_view key) {
  std::string line;
  if (!std::getline(in, line)) throw corrupt("truncated header before '" + std::string(key) + "'");
  if (line.rfind(key, 0) != 0) throw corrupt("expected '" + std::string(key) + "'");
  return line.substr(key.size());
}

void put_double(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

double get_double(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw corrupt("truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const ModelParameters& model, std::ostream& out) {
  const auto& s = model.shape;
  out << kMagic << '\n';
  out << "kind: " << to_string(s.kind) << '\n';
  out << "shape: " << s.embed_dim << ' ' << s.table_dim << ' ' << s.hidden << ' ' << s.stacks
      << ' ' << s.input_length << ' ' << s.output_length << '\n';
  out << "tables:";
  for (auto size : model.vocabulary.table_sizes()) out << ' ' << size;
  out << '\n';
  out << "vocab_hash: " << std::hex << model.vocabulary.hash() << std::dec << '\n';
  out << "tensors: " << model.params.size() << '\n';
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto& t = model.params.at(i);
    out << "tensor: " << model.params.name(i) << ' ' << t.rows << ' ' << t.cols << '\n';
  }
  out << "payload:\n";
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    for (double v : model.params.at(i).data) put_double(out, v);
  }
}

void save_checkpoint(const ModelParameters& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  save_checkpoint(model, out);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

ModelParameters load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw corrupt("bad magic line");

  ModelShape shape;
  {
    std::string kind = read_line(in, "kind: ");
    if (kind != "caching" && kind != "prefetch") throw corrupt("unknown kind '" + kind + "'");
    shape.kind = parse_model_kind(kind);
    std::istringstream ss(read_line(in, "shape: "));
    if (!(ss >> shape.embed_dim >> shape.table_dim >> shape.hidden >> shape.stacks >>
          shape.input_length >> shape.output_length)) {
      throw corrupt("bad shape line");
    }
  }
  std::vector<std::uint64_t> sizes;
  {
    std::istringstream ss(read_line(in, "tables:"));
    std::uint64_t v;
    while (ss >> v) sizes.push_back(v);
    if (sizes.empty()) throw corrupt("no tables");
  }
  Vocabulary vocab(std::move(sizes));
  {
    std::istringstream ss(read_line(in, "vocab_hash: "));
    std::uint64_t h = 0;
    if (!(ss >> std::hex >> h) || h != vocab.hash()) throw corrupt("vocabulary hash mismatch");
  }

  // Rebuild the expected layout and check the header against it.
  ModelParameters model;
  try {
    model = make_model(shape, vocab, 0, 0.0);
  } catch (const Error& e) {
    throw corrupt(e.what());
  }
  std::size_t count = 0;
  {
    std::istringstream ss(read_line(in, "tensors: "));
    if (!(ss >> count) || count != model.params.size()) throw corrupt("tensor count mismatch");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ss(read_line(in, "tensor: "));
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(ss >> name >> rows >> cols) || name != model.params.name(i) ||
        rows != model.params.at(i).rows || cols != model.params.at(i).cols) {
      throw corrupt("tensor " + std::to_string(i) + " does not match the model layout");
    }
  }
  if (!std::getline(in, line) || line != "payload:") throw corrupt("missing payload marker");
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    for (auto& v : model.params.at(i).data) v = get_double(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw corrupt("trailing bytes after payload");
  return model;
}

ModelParameters load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "no checkpoint at " + path.string());
  return load_checkpoint(in);
}

ModelParameters load_checkpoint(const std::filesystem::path& path, const Vocabulary& expected) {
  auto model = load_checkpoint(path);
  if (model.vocabulary.hash() != expected.hash() || !(model.vocabulary == expected)) {
    throw Error(ErrorKind::kVocabularyMismatch,
                "checkpoint " + path.string() + " was trained on a different vocabulary");
  }
  return model;
}

}  // namespace tiercache::nn
