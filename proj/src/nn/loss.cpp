#include "tiercache/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tiercache/error.hpp"

namespace tiercache::nn {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "cross-entropy";
    case LossKind::kChamfer2: return "chamfer2";
    case LossKind::kChamfer1: return "chamfer1";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "cross-entropy") return LossKind::kCrossEntropy;
  if (name == "chamfer2") return LossKind::kChamfer2;
  if (name == "chamfer1") return LossKind::kChamfer1;
  throw Error(ErrorKind::kInvalidConfig, "unknown loss '" + std::string(name) + "'");
}

void LossConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::kInvalidConfig, "alpha must be in (0,1)");
  if (window_ratio < 1) throw Error(ErrorKind::kInvalidConfig, "window ratio must be >= 1");
}

double chamfer_one_sided(std::span<const double> from, std::span<const double> to) {
  if (from.empty() || to.empty()) throw Error(ErrorKind::kValidation, "chamfer of an empty set");
  double total = 0.0;
  for (double x : from) {
    double best = std::numeric_limits<double>::infinity();
    for (double y : to) best = std::min(best, std::abs(x - y));
    total += best;
  }
  return total;
}

double chamfer_loss(std::span<const double> po, std::span<const double> window, double alpha) {
  if (po.empty() || window.empty()) throw Error(ErrorKind::kValidation, "chamfer of an empty set");
  return alpha / static_cast<double>(po.size()) * chamfer_one_sided(po, window) +
         (1.0 - alpha) / static_cast<double>(window.size()) * chamfer_one_sided(window, po);
}

double cross_entropy_loss(std::span<const double> probs, std::span<const std::uint8_t> labels) {
  if (probs.size() != labels.size()) {
    throw Error(ErrorKind::kValidation, "cross entropy: length mismatch");
  }
  if (probs.empty()) throw Error(ErrorKind::kValidation, "cross entropy of an empty sequence");
  constexpr double kEps = 1e-7;
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double p = std::clamp(probs[i], kEps, 1.0 - kEps);
    loss -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return loss / static_cast<double>(probs.size());
}

}  // namespace tiercache::nn
