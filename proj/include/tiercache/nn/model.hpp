#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tiercache/nn/loss.hpp"
#include "tiercache/nn/tape.hpp"
#include "tiercache/nn/tensor.hpp"
#include "tiercache/trace.hpp"

namespace tiercache::nn {

enum class ModelKind { kCaching, kPrefetch };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelShape {
  ModelKind kind = ModelKind::kCaching;
  std::size_t embed_dim = 16;
  std::size_t table_dim = 4;
  std::size_t hidden = 32;
  std::size_t stacks = 1;
  std::size_t input_length = 15;
  std::size_t output_length = 5;

  void validate() const;
  /// Decoder steps: one per input for caching, one per output slot for prefetch.
  std::size_t decoder_steps() const {
    return kind == ModelKind::kCaching ? input_length : output_length;
  }

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Default shape for each model: 1 stack for caching, 2 for prefetch.
ModelShape default_shape(ModelKind kind);

/// Seq2seq LSTM encoder/decoder with additive attention.
///
/// Tokens are [embed.global[global_id]; embed.table[table_id]]. The encoder
/// and decoder are `stacks`-deep LSTMs; the decoder starts from the encoder's
/// final states and reads the input tokens (caching) or a learned slot
/// embedding (prefetch). Each decoder state s attends over the top encoder
/// states h_j with score v . tanh(W_enc h_j + W_dec s + b), and the head reads
/// tanh(W_c [s; context] + b_c).
struct ModelParameters {
  ModelShape shape;
  Vocabulary vocabulary;
  ParameterSet params;

  std::size_t parameter_count() const { return params.scalar_count(); }
  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;
};

/// Parameters drawn from uniform(-init_scale, init_scale). init_scale 0
/// gives an all-zero model.
ModelParameters make_model(const ModelShape& shape, const Vocabulary& vocabulary,
                           std::uint64_t seed, double init_scale = 0.08);

/// Records the forward pass of one sequence on `tape`. Returns L_in
/// probabilities (caching) or L_out normalized index predictions (prefetch).
/// Throws kValidation for ids outside the model's vocabulary.
std::vector<Var> build_forward(Tape& tape, const ModelParameters& model,
                               std::span<const EmbeddingIndex> input);

std::vector<double> forward_caching(const ModelParameters& model,
                                    std::span<const EmbeddingIndex> input);
std::vector<double> forward_prefetch(const ModelParameters& model,
                                     std::span<const EmbeddingIndex> input);

/// global_id / (total - 1); 0 for a single-id vocabulary.
double normalize_index(GlobalId id, const Vocabulary& vocabulary);
/// Inverse of normalize_index with rounding to nearest and clamping.
std::vector<EmbeddingIndex> decode_indices(std::span<const double> po,
                                           const Vocabulary& vocabulary);

/// Loss of one labeled sample under `loss`: cross-entropy against
/// cache_labels, or Chamfer against the normalized window.
Var build_sample_loss(Tape& tape, const ModelParameters& model, const SequenceSample& sample,
                      const LossConfig& loss);

/// Mean loss over `batch`; when `grads` is given it receives d(mean)/d(params)
/// (overwritten, same layout as model.params). Throws kNonFinite naming the
/// first parameter whose gradient is not finite.
double loss_and_gradients(const ModelParameters& model, std::span<const SequenceSample> batch,
                          const LossConfig& loss, ParameterSet* grads);

}  // namespace tiercache::nn
