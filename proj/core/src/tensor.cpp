#include "dstag/tensor.hpp"

#include <cmath>

namespace dstag {

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw ConfigError("tensor extents must be positive");
    n *= e;
  }
  t.shape = std::move(shape);
  t.v.assign(n, 0.0);
  return t;
}

bool Tensor::all_finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace dstag
