#include "tiercache/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "tiercache/error.hpp"

namespace tiercache::nn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kInvalidConfig, "learning rate must be > 0");
  if (batch_size == 0) throw Error(ErrorKind::kInvalidConfig, "batch size must be > 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorKind::kInvalidConfig, "validation fraction must be in [0,1)");
  }
}

namespace {

bool usable(const ModelParameters& model, const SequenceSample& s) {
  if (model.shape.kind == ModelKind::kCaching) return s.cache_labels.has_value();
  return !s.window.empty();
}

std::vector<double> outputs_of(const ModelParameters& model, const SequenceSample& s) {
  return model.shape.kind == ModelKind::kCaching ? forward_caching(model, s.input)
                                                 : forward_prefetch(model, s.input);
}

std::vector<double> normalized_window(const ModelParameters& model, const SequenceSample& s) {
  std::vector<double> w;
  w.reserve(s.window.size());
  for (const auto& e : s.window) w.push_back(normalize_index(e.global_id, model.vocabulary));
  return w;
}

// Identifies the smooth piece of the loss a parameter point lies on: which
// nearest neighbours the Chamfer terms pick and on which side of them each
// point sits, or which probabilities are clamped.
std::vector<long> loss_signature(const ModelParameters& model,
                                 std::span<const SequenceSample> batch, const LossConfig& loss) {
  std::vector<long> sig;
  for (const auto& s : batch) {
    auto out = outputs_of(model, s);
    if (model.shape.kind == ModelKind::kCaching) {
      for (double p : out) sig.push_back(p < 1e-7 || p > 1.0 - 1e-7);
      continue;
    }
    auto w = normalized_window(model, s);
    auto nearest = [](double x, std::span<const double> set) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < set.size(); ++j) {
        if (std::abs(x - set[j]) < std::abs(x - set[best])) best = j;
      }
      return best;
    };
    auto side = [](double d) { return d > 0 ? 1L : (d < 0 ? -1L : 0L); };
    for (double x : out) {
      auto j = nearest(x, w);
      sig.push_back(static_cast<long>(j));
      sig.push_back(side(x - w[j]));
    }
    if (loss.kind != LossKind::kChamfer1) {
      for (double y : w) {
        auto i = nearest(y, out);
        sig.push_back(static_cast<long>(i));
        sig.push_back(side(out[i] - y));
      }
    }
  }
  return sig;
}

}  // namespace

double caching_accuracy(const ModelParameters& model, std::span<const SequenceSample> samples) {
  std::size_t right = 0, total = 0;
  for (const auto& s : samples) {
    if (!s.cache_labels) continue;
    auto probs = forward_caching(model, s.input);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      right += static_cast<std::uint8_t>(probs[i] >= 0.5) == (*s.cache_labels)[i];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(right) / static_cast<double>(total);
}

double prefetch_correctness(const ModelParameters& model, std::span<const SequenceSample> samples) {
  std::size_t useful = 0, issued = 0;
  for (const auto& s : samples) {
    auto po = forward_prefetch(model, s.input);
    std::unordered_set<GlobalId> window;
    for (const auto& e : s.window) window.insert(e.global_id);
    for (const auto& e : decode_indices(po, model.vocabulary)) {
      useful += window.contains(e.global_id);
      ++issued;
    }
  }
  return issued == 0 ? 0.0 : static_cast<double>(useful) / static_cast<double>(issued);
}

double output_spread(const ModelParameters& model, std::span<const SequenceSample> samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples) {
    auto out = outputs_of(model, s);
    double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
    double var = 0.0;
    for (double x : out) var += (x - mean) * (x - mean);
    total += std::sqrt(var / static_cast<double>(out.size()));
  }
  return total / static_cast<double>(samples.size());
}

GradCheckReport gradient_check(const ModelParameters& model, std::span<const SequenceSample> batch,
                               const LossConfig& loss, double step, std::size_t max_per_tensor) {
  GradCheckReport report;
  ParameterSet grads;
  loss_and_gradients(model, batch, loss, &grads);
  ModelParameters probe = model;
  const auto base_sig = loss_signature(model, batch, loss);

  for (std::size_t t = 0; t < probe.params.size(); ++t) {
    auto& data = probe.params.at(t).data;
    const std::size_t n = data.size();
    const std::size_t count = max_per_tensor == 0 ? n : std::min(n, max_per_tensor);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t idx = count == n ? k : k * n / count;
      const double saved = data[idx];
      data[idx] = saved + step;
      double plus = loss_and_gradients(probe, batch, loss, nullptr);
      bool tie = loss_signature(probe, batch, loss) != base_sig;
      data[idx] = saved - step;
      double minus = loss_and_gradients(probe, batch, loss, nullptr);
      tie = tie || loss_signature(probe, batch, loss) != base_sig;
      data[idx] = saved;
      if (tie) {
        ++report.excluded;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * step);
      const double analytic = grads.at(t).data[idx];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      const double rel = std::abs(numeric - analytic) / denom;
      ++report.checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = probe.params.name(t) + "[" + std::to_string(idx) + "]";
      }
    }
  }
  return report;
}

TrainResult train(const LabeledDataset& dataset, ModelParameters init, const TrainConfig& cfg,
                  const LossConfig& loss) {
  cfg.validate();
  if (!(init.vocabulary == dataset.vocabulary)) {
    throw Error(ErrorKind::kVocabularyMismatch, "model and dataset vocabularies differ");
  }
  if (loss.kind == LossKind::kChamfer2) loss.validate();
  const bool caching = init.shape.kind == ModelKind::kCaching;
  if (caching != (loss.kind == LossKind::kCrossEntropy)) {
    throw Error(ErrorKind::kInvalidConfig, "caching models train with cross-entropy, "
                                           "prefetch models with a Chamfer loss");
  }

  std::vector<SequenceSample> usable_samples;
  for (const auto& s : dataset.samples) {
    if (usable(init, s)) usable_samples.push_back(s);
  }
  if (usable_samples.empty()) throw Error(ErrorKind::kValidation, "no usable training samples");
  const auto n_valid = static_cast<std::size_t>(
      std::floor(static_cast<double>(usable_samples.size()) * cfg.validation_fraction));
  std::vector<SequenceSample> valid(usable_samples.end() - static_cast<std::ptrdiff_t>(n_valid),
                                    usable_samples.end());
  usable_samples.resize(usable_samples.size() - n_valid);
  const auto& train_samples = usable_samples;

  TrainResult result;
  result.params = std::move(init);
  auto& params = result.params;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  auto next_batch = [&] {
    std::vector<SequenceSample> batch;
    batch.reserve(cfg.batch_size);
    while (batch.size() < std::min(cfg.batch_size, order.size())) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(train_samples[order[cursor++]]);
    }
    return batch;
  };

  const std::size_t per_epoch =
      (train_samples.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t eval_every = cfg.eval_every == 0 ? per_epoch : cfg.eval_every;
  auto evaluate = [&](std::size_t step) {
    if (valid.empty()) return;
    ValidationPoint p;
    p.step = step;
    p.loss = loss_and_gradients(params, valid, loss, nullptr);
    p.metric = caching ? caching_accuracy(params, valid) : prefetch_correctness(params, valid);
    result.validation.push_back(p);
  };

  ParameterSet grads = params.params.zeros_like();
  ParameterSet m1 = params.params.zeros_like();
  ParameterSet m2 = params.params.zeros_like();
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double beta1_pow = 1.0, beta2_pow = 1.0;

  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    auto batch = next_batch();
    if (step == 1 && cfg.gradient_check) {
      result.gradient_check = gradient_check(params, batch, loss, 1e-4, 64);
    }
    double value;
    try {
      value = loss_and_gradients(params, batch, loss, &grads);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNonFinite) throw;
      result.diverged = true;
      result.message = "step " + std::to_string(step) + ": " + e.what();
      return result;
    }
    result.loss_curve.push_back(value);

    ModelParameters last_good = params;
    beta1_pow *= kBeta1;
    beta2_pow *= kBeta2;
    const double lr = cfg.learning_rate * std::sqrt(1.0 - beta2_pow) / (1.0 - beta1_pow);
    bool finite = true;
    for (std::size_t t = 0; t < params.params.size(); ++t) {
      auto& w = params.params.at(t).data;
      const auto& g = grads.at(t).data;
      auto& a = m1.at(t).data;
      auto& b = m2.at(t).data;
      for (std::size_t k = 0; k < w.size(); ++k) {
        a[k] = kBeta1 * a[k] + (1.0 - kBeta1) * g[k];
        b[k] = kBeta2 * b[k] + (1.0 - kBeta2) * g[k] * g[k];
        w[k] -= lr * a[k] / (std::sqrt(b[k]) + kEps);
        finite = finite && std::isfinite(w[k]);
      }
    }
    if (!finite) {
      result.params = std::move(last_good);
      result.diverged = true;
      result.message = "step " + std::to_string(step) + ": parameters became non-finite";
      return result;
    }
    if (step % eval_every == 0) evaluate(step);
  }
  if (result.validation.empty() || result.validation.back().step != cfg.max_steps) {
    evaluate(cfg.max_steps);
  }
  return result;
}

}  // namespace tiercache::nn
