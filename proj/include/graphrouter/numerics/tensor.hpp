#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "graphrouter/common/error.hpp"

namespace graphrouter::numerics {

// Dense row-major tensor of doubles. Rank 1 and rank 2 cover everything the
// model needs; scalars are represented as rank-1 tensors with one element.
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::int64_t> shape) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.check_shape();
    t.data_.assign(static_cast<std::size_t>(t.numel()), 0.0);
    return t;
  }

  static Tensor full(std::vector<std::int64_t> shape, double value) {
    Tensor t = zeros(std::move(shape));
    for (double& x : t.data_) x = value;
    return t;
  }

  static Tensor scalar(double value) {
    Tensor t = zeros({1});
    t.data_[0] = value;
    return t;
  }

  static Tensor from_vector(std::vector<double> values) {
    Tensor t;
    t.shape_ = {static_cast<std::int64_t>(values.size())};
    t.data_ = std::move(values);
    t.check_shape();
    return t;
  }

  static Tensor from_matrix(std::int64_t rows, std::int64_t cols,
                            std::vector<double> values) {
    Tensor t;
    t.shape_ = {rows, cols};
    t.check_shape();
    if (static_cast<std::int64_t>(values.size()) != rows * cols)
      throw numeric_error("Tensor: matrix data size " +
                          std::to_string(values.size()) +
                          " does not match shape " + shape_string({rows, cols}));
    t.data_ = std::move(values);
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }

  const std::vector<std::int64_t>& shape() const { return shape_; }

  std::int64_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (std::int64_t d : shape_) n *= d;
    return shape_.empty() ? 0 : n;
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& at(std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double at(std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  double& at(std::int64_t r, std::int64_t c) {
    return data_[static_cast<std::size_t>(r * shape_[1] + c)];
  }
  double at(std::int64_t r, std::int64_t c) const {
    return data_[static_cast<std::size_t>(r * shape_[1] + c)];
  }

  // Value of a single-element tensor.
  double value() const {
    if (numel() != 1)
      throw numeric_error("Tensor: value() requires a scalar, got shape " +
                          shape_string(shape_));
    return data_[0];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  static std::string shape_string(const std::vector<std::int64_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    s += ")";
    return s;
  }

  std::string shape_string() const { return shape_string(shape_); }

private:
  void check_shape() const {
    if (shape_.empty() || shape_.size() > 2)
      throw numeric_error("Tensor: rank must be 1 or 2, got shape " +
                          shape_string(shape_));
    for (std::int64_t d : shape_)
      if (d < 0)
        throw numeric_error("Tensor: negative dimension in shape " +
                            shape_string(shape_));
  }

  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

}  // namespace graphrouter::numerics
