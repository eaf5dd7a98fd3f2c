#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tiercache/labeler.hpp"
#include "tiercache/nn/loss.hpp"
#include "tiercache/nn/model.hpp"

namespace tiercache::nn {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_steps = 500;
  std::uint64_t seed = 0;
  /// Run a finite-difference check on the first batch before training.
  bool gradient_check = false;
  double validation_fraction = 0.1;
  /// Validation cadence in steps; 0 means once per epoch.
  std::size_t eval_every = 0;

  void validate() const;
};

struct ValidationPoint {
  std::size_t step = 0;
  double loss = 0.0;
  /// Label accuracy (caching) or prefetch correctness (prefetch).
  double metric = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
  /// Entries whose +-h perturbation crosses a min-tie or clamp boundary.
  std::size_t excluded = 0;
};

struct TrainResult {
  ModelParameters params;
  /// Training loss of every step, starting at step 1.
  std::vector<double> loss_curve;
  std::vector<ValidationPoint> validation;
  bool diverged = false;
  std::string message;
  std::optional<GradCheckReport> gradient_check;
};

/// Mini-batch Adam (beta1 0.9, beta2 0.999). Caching models need
/// cache_labels, prefetch models the window. On a non-finite loss or
/// gradient, training stops and returns the last good parameters with
/// `diverged` set.
TrainResult train(const LabeledDataset& dataset, ModelParameters init, const TrainConfig& cfg,
                  const LossConfig& loss);

/// Fraction of positions where (prob >= 0.5) matches the label.
double caching_accuracy(const ModelParameters& model, std::span<const SequenceSample> samples);
/// Fraction of decoded predictions that occur in the sample's window.
double prefetch_correctness(const ModelParameters& model, std::span<const SequenceSample> samples);
/// Mean over samples of the population stddev of the raw outputs across slots.
double output_spread(const ModelParameters& model, std::span<const SequenceSample> samples);

/// Compares reverse-mode gradients of the mean batch loss with central
/// differences. Relative error is |a - n| / max(|a|, |n|, 1e-6).
/// `max_per_tensor` (0 = all) caps how many entries per tensor are probed,
/// spread evenly.
GradCheckReport gradient_check(const ModelParameters& model, std::span<const SequenceSample> batch,
                               const LossConfig& loss, double step = 1e-4,
                               std::size_t max_per_tensor = 0);

}  // namespace tiercache::nn
