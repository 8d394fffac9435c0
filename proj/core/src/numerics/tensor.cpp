#include "expctr/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace expctr::numerics {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

std::size_t element_count(const Shape& shape) {
  if (shape.size() > 2) throw ShapeError("tensor: rank > 2 is not supported, got " + to_string(shape));
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  values_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (element_count(shape_) != values_.size()) {
    throw ShapeError("tensor: shape " + to_string(shape_) + " does not match " +
                     std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::scalar(double value) { return Tensor({}, std::vector<double>{value}); }

Tensor Tensor::row(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const noexcept {
  switch (shape_.size()) {
    case 0: return 1;
    case 1: return shape_[0];
    default: return shape_[1];
  }
}

double Tensor::item() const {
  if (values_.size() != 1) throw ShapeError("item: tensor " + to_string(shape_) + " is not a single value");
  return values_[0];
}

void Tensor::fill(double value) noexcept { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Parameter::Parameter(std::string name_, Tensor value_, bool trainable_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.shape()), trainable(trainable_) {}

}  // namespace expctr::numerics
