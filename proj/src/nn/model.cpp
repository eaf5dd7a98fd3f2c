#include "tiercache/nn/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "tiercache/error.hpp"

namespace tiercache::nn {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::kCaching ? "caching" : "prefetch";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "caching") return ModelKind::kCaching;
  if (name == "prefetch") return ModelKind::kPrefetch;
  throw Error(ErrorKind::kInvalidConfig, "unknown model kind '" + std::string(name) + "'");
}

void ModelShape::validate() const {
  if (embed_dim == 0 || table_dim == 0 || hidden == 0 || stacks == 0 || input_length == 0 ||
      output_length == 0) {
    throw Error(ErrorKind::kInvalidConfig, "model dimensions must be positive");
  }
}

ModelShape default_shape(ModelKind kind) {
  ModelShape s;
  s.kind = kind;
  s.stacks = kind == ModelKind::kCaching ? 1 : 2;
  return s;
}

namespace {

std::string layer_name(const char* prefix, std::size_t layer, const char* leaf) {
  return std::string(prefix) + std::to_string(layer) + "." + leaf;
}

}  // namespace

ModelParameters make_model(const ModelShape& shape, const Vocabulary& vocabulary,
                           std::uint64_t seed, double init_scale) {
  shape.validate();
  if (vocabulary.total() == 0) throw Error(ErrorKind::kInvalidConfig, "empty vocabulary");
  ModelParameters m{shape, vocabulary, {}};
  auto& p = m.params;
  const std::size_t token = shape.embed_dim + shape.table_dim;
  const std::size_t h = shape.hidden;
  p.add("embed.global", vocabulary.total(), shape.embed_dim);
  p.add("embed.table", vocabulary.table_count(), shape.table_dim);
  for (const char* side : {"enc", "dec"}) {
    for (std::size_t l = 0; l < shape.stacks; ++l) {
      std::size_t in = l == 0 ? token : h;
      p.add(layer_name(side, l, "W"), 4 * h, in + h);
      p.add(layer_name(side, l, "b"), 4 * h, 1);
    }
  }
  if (shape.kind == ModelKind::kPrefetch) p.add("dec.slot", shape.output_length, token);
  p.add("attn.W_enc", h, h);
  p.add("attn.W_dec", h, h);
  p.add("attn.b", h, 1);
  p.add("attn.v", h, 1);
  p.add("attn.W_c", h, 2 * h);
  p.add("attn.b_c", h, 1);
  p.add("head.w", 1, h);
  p.add("head.b", 1, 1);

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (auto& x : p.at(i).data) {
      double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      x = (2.0 * u - 1.0) * init_scale;
    }
  }
  return m;
}

namespace {

struct Ids {
  ParamId global, table, slot;
  std::vector<ParamId> enc_w, enc_b, dec_w, dec_b;
  ParamId w_enc, w_dec, b_attn, v, w_c, b_c, head_w, head_b;

  explicit Ids(const ModelParameters& m) {
    const auto& p = m.params;
    global = p.find("embed.global");
    table = p.find("embed.table");
    if (m.shape.kind == ModelKind::kPrefetch) slot = p.find("dec.slot");
    for (std::size_t l = 0; l < m.shape.stacks; ++l) {
      enc_w.push_back(p.find(layer_name("enc", l, "W")));
      enc_b.push_back(p.find(layer_name("enc", l, "b")));
      dec_w.push_back(p.find(layer_name("dec", l, "W")));
      dec_b.push_back(p.find(layer_name("dec", l, "b")));
    }
    w_enc = p.find("attn.W_enc");
    w_dec = p.find("attn.W_dec");
    b_attn = p.find("attn.b");
    v = p.find("attn.v");
    w_c = p.find("attn.W_c");
    b_c = p.find("attn.b_c");
    head_w = p.find("head.w");
    head_b = p.find("head.b");
  }
};

void check_vocabulary(const ModelParameters& model, std::span<const EmbeddingIndex> input) {
  const auto& vocab = model.vocabulary;
  for (const auto& e : input) {
    if (e.table_id >= vocab.table_count() || e.row_id >= vocab.table_sizes()[e.table_id] ||
        e.global_id >= vocab.total()) {
      throw Error(ErrorKind::kValidation,
                  "id (" + std::to_string(e.table_id) + "," + std::to_string(e.row_id) +
                      ") outside the model vocabulary");
    }
  }
}

}  // namespace

std::vector<Var> build_forward(Tape& tape, const ModelParameters& model,
                               std::span<const EmbeddingIndex> input) {
  check_vocabulary(model, input);
  if (input.empty()) throw Error(ErrorKind::kValidation, "empty input sequence");
  const ModelShape& shape = model.shape;
  const Ids ids(model);
  const std::size_t h = shape.hidden;

  std::vector<Var> tokens;
  tokens.reserve(input.size());
  for (const auto& e : input) {
    tokens.push_back(tape.concat(tape.gather_row(ids.global, e.global_id),
                                 tape.gather_row(ids.table, e.table_id)));
  }

  std::vector<Var> hs(shape.stacks), cs(shape.stacks);
  for (std::size_t l = 0; l < shape.stacks; ++l) {
    hs[l] = tape.constant(std::vector<double>(h, 0.0));
    cs[l] = tape.constant(std::vector<double>(h, 0.0));
  }
  std::vector<Var> encoded;
  encoded.reserve(tokens.size());
  for (Var x : tokens) {
    for (std::size_t l = 0; l < shape.stacks; ++l) {
      std::tie(hs[l], cs[l]) = tape.lstm_cell(ids.enc_w[l], ids.enc_b[l], x, hs[l], cs[l]);
      x = hs[l];
    }
    encoded.push_back(x);
  }

  std::vector<Var> keys;
  keys.reserve(encoded.size());
  for (Var e : encoded) keys.push_back(tape.linear(ids.w_enc, e));
  Var v = tape.param_vector(ids.v);

  std::vector<Var> outputs;
  const std::size_t steps = shape.decoder_steps();
  outputs.reserve(steps);
  std::vector<Var> scores(keys.size());
  for (std::size_t t = 0; t < steps; ++t) {
    Var x = shape.kind == ModelKind::kCaching ? tokens[t] : tape.gather_row(ids.slot, t);
    for (std::size_t l = 0; l < shape.stacks; ++l) {
      std::tie(hs[l], cs[l]) = tape.lstm_cell(ids.dec_w[l], ids.dec_b[l], x, hs[l], cs[l]);
      x = hs[l];
    }
    Var query = tape.affine(ids.w_dec, ids.b_attn, x);
    for (std::size_t j = 0; j < keys.size(); ++j) {
      scores[j] = tape.dot(v, tape.tanh(tape.add(keys[j], query)));
    }
    Var context = tape.attend(scores, encoded);
    Var combined = tape.tanh(tape.affine(ids.w_c, ids.b_c, tape.concat(x, context)));
    Var out = tape.affine(ids.head_w, ids.head_b, combined);
    outputs.push_back(shape.kind == ModelKind::kCaching ? tape.sigmoid(out) : out);
  }
  return outputs;
}

namespace {

std::vector<double> run_forward(const ModelParameters& model, std::span<const EmbeddingIndex> input,
                                ModelKind expected) {
  if (model.shape.kind != expected) {
    throw Error(ErrorKind::kInvalidConfig, "model is a " + std::string(to_string(model.shape.kind)) +
                                               " model, not " + std::string(to_string(expected)));
  }
  Tape tape(model.params);
  auto outs = build_forward(tape, model, input);
  std::vector<double> values;
  values.reserve(outs.size());
  for (Var o : outs) values.push_back(tape.scalar(o));
  return values;
}

}  // namespace

std::vector<double> forward_caching(const ModelParameters& model,
                                    std::span<const EmbeddingIndex> input) {
  return run_forward(model, input, ModelKind::kCaching);
}

std::vector<double> forward_prefetch(const ModelParameters& model,
                                     std::span<const EmbeddingIndex> input) {
  return run_forward(model, input, ModelKind::kPrefetch);
}

double normalize_index(GlobalId id, const Vocabulary& vocabulary) {
  if (vocabulary.total() <= 1) return 0.0;
  return static_cast<double>(id) / static_cast<double>(vocabulary.total() - 1);
}

std::vector<EmbeddingIndex> decode_indices(std::span<const double> po,
                                           const Vocabulary& vocabulary) {
  std::vector<EmbeddingIndex> out;
  out.reserve(po.size());
  const double top = static_cast<double>(vocabulary.total() - 1);
  for (double x : po) {
    double scaled = std::isnan(x) ? 0.0 : std::clamp(std::round(x * top), 0.0, top);
    out.push_back(vocabulary.from_global(static_cast<GlobalId>(scaled)));
  }
  return out;
}

Var build_sample_loss(Tape& tape, const ModelParameters& model, const SequenceSample& sample,
                      const LossConfig& loss) {
  auto outs = build_forward(tape, model, sample.input);
  if (model.shape.kind == ModelKind::kCaching) {
    if (!sample.cache_labels) throw Error(ErrorKind::kValidation, "sample has no caching labels");
    return tape.binary_cross_entropy(outs, *sample.cache_labels);
  }
  if (sample.window.empty()) throw Error(ErrorKind::kValidation, "sample has no window");
  std::vector<double> window;
  window.reserve(sample.window.size());
  for (const auto& e : sample.window) window.push_back(normalize_index(e.global_id, model.vocabulary));
  double alpha = loss.kind == LossKind::kChamfer1 ? 1.0 : loss.alpha;
  return tape.chamfer(outs, window, alpha);
}

double loss_and_gradients(const ModelParameters& model, std::span<const SequenceSample> batch,
                          const LossConfig& loss, ParameterSet* grads) {
  if (batch.empty()) throw Error(ErrorKind::kValidation, "empty batch");
  if (grads) {
    if (grads->size() != model.params.size()) *grads = model.params.zeros_like();
    grads->fill(0.0);
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& sample : batch) {
    Tape tape(model.params, grads);
    Var l = build_sample_loss(tape, model, sample, loss);
    double value = tape.scalar(l);
    if (!std::isfinite(value)) throw Error(ErrorKind::kNonFinite, "loss is not finite");
    total += value;
    if (grads) tape.backward(tape.scaled_sum(std::span<const Var>(&l, 1), scale));
  }
  if (grads) {
    for (std::size_t i = 0; i < grads->size(); ++i) {
      for (double g : grads->at(i).data) {
        if (!std::isfinite(g)) {
          throw Error(ErrorKind::kNonFinite, "non-finite gradient in " + grads->name(i));
        }
      }
    }
  }
  return total * scale;
}

}  // namespace tiercache::nn
