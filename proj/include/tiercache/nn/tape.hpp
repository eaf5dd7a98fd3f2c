#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "tiercache/nn/tensor.hpp"

namespace tiercache::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
};

/// Reverse-mode autodiff over vector-valued nodes. Parameters are read from
/// a ParameterSet; backward() accumulates into a gradient set of the same
/// layout (if one was given). A tape is single-use and single-owner.
class Tape {
 public:
  explicit Tape(const ParameterSet& params, ParameterSet* grads = nullptr);

  Var constant(std::vector<double> value);
  /// Row `row` of a parameter matrix, as a vector.
  Var gather_row(ParamId table, std::size_t row);
  /// Parameter viewed as a flat vector.
  Var param_vector(ParamId p);
  /// W x + b; b may be omitted.
  Var affine(ParamId weight, ParamId bias, Var x);
  Var linear(ParamId weight, Var x);
  Var concat(Var a, Var b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var dot(Var a, Var b);

  /// One LSTM step with gates [i, f, g, o] stacked in W's rows:
  /// z = W [x; h] + b, c' = f*c + i*g, h' = o*tanh(c'). Returns (h', c').
  std::pair<Var, Var> lstm_cell(ParamId weight, ParamId bias, Var x, Var h, Var c);

  /// softmax(scores) weighted sum of values. Scores are scalar nodes.
  Var attend(std::span<const Var> scores, std::span<const Var> values);

  /// Two-sided normalized Chamfer measure between scalar nodes `po` and the
  /// constant set `window`. alpha = 1 gives the one-sided measure.
  Var chamfer(std::span<const Var> po, std::span<const double> window, double alpha);
  /// Mean binary cross-entropy of scalar probability nodes against labels.
  Var binary_cross_entropy(std::span<const Var> probs, std::span<const std::uint8_t> labels);
  /// Sum of scalar nodes times `scale`.
  Var scaled_sum(std::span<const Var> scalars, double scale);

  const std::vector<double>& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const { return nodes_[v.id].value[0]; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Propagates d(root)/d(.) back to every node and into the gradient set.
  void backward(Var root);

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    std::function<void(Tape&, std::uint32_t)> back;
  };

  Var push(std::vector<double> value, std::function<void(Tape&, std::uint32_t)> back);
  std::vector<double>& grad_of(Var v) { return nodes_[v.id].grad; }
  Tensor* param_grad(ParamId p) { return grads_ ? &(*grads_)[p] : nullptr; }

  const ParameterSet& params_;
  ParameterSet* grads_;
  std::vector<Node> nodes_;
};

}  // namespace tiercache::nn
