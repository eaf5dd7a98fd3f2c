#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace tiercache::nn {

enum class LossKind { kCrossEntropy, kChamfer2, kChamfer1 };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct LossConfig {
  /// Weight of the prediction-to-window term of the two-sided Chamfer loss.
  double alpha = 0.7;
  std::size_t window_ratio = 3;
  LossKind kind = LossKind::kChamfer2;

  void validate() const;
};

/// Sum over x in `from` of the distance to the nearest y in `to`.
double chamfer_one_sided(std::span<const double> from, std::span<const double> to);

/// alpha/|po| * d(po, w) + (1 - alpha)/|w| * d(w, po). alpha = 1 is the
/// normalized one-sided measure.
double chamfer_loss(std::span<const double> po, std::span<const double> window, double alpha);

/// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
double cross_entropy_loss(std::span<const double> probs, std::span<const std::uint8_t> labels);

}  // namespace tiercache::nn
