#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tiercache::nn {

/// Row-major dense matrix of doubles; vectors are n x 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Index of a tensor inside a ParameterSet.
struct ParamId {
  std::size_t index = 0;
};

/// Named, ordered collection of tensors. Gradient stores share the layout of
/// the parameters they belong to.
class ParameterSet {
 public:
  ParamId add(std::string name, std::size_t rows, std::size_t cols);
  /// Throws kValidation for unknown names.
  ParamId find(std::string_view name) const;
  bool contains(std::string_view name) const;

  Tensor& operator[](ParamId id) { return tensors_[id.index]; }
  const Tensor& operator[](ParamId id) const { return tensors_[id.index]; }
  Tensor& at(std::size_t i) { return tensors_[i]; }
  const Tensor& at(std::size_t i) const { return tensors_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

  /// Same names and shapes, all zeros.
  ParameterSet zeros_like() const;
  void fill(double value);

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

}  // namespace tiercache::nn
