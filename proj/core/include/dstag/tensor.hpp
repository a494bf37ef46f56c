#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "dstag/errors.hpp"

namespace dstag {

// Dense row-major tensor of doubles. Every model parameter and gradient is
// a rank-1 (bias, embedding row) or rank-2 (weight matrix, embedding table)
// tensor. All computation is 64-bit.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor vec(std::size_t n) { return zeros({n}); }
  static Tensor mat(std::size_t rows, std::size_t cols) {
    return zeros({rows, cols});
  }

  std::size_t size() const { return v.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

  std::span<double> row(std::size_t r) {
    return {v.data() + r * cols(), cols()};
  }
  std::span<const double> row(std::size_t r) const {
    return {v.data() + r * cols(), cols()};
  }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

}  // namespace dstag
