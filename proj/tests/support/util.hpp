#pragma once

#include <cmath>
#include <vector>

#include "dtnet/rng.hpp"
#include "dtnet/tensor.hpp"

namespace testutil {

inline dtnet::Tensor random_tensor(std::vector<int> shape, dtnet::Rng& rng,
                                   bool requires_grad = false, double lo = -1.0,
                                   double hi = 1.0) {
  dtnet::Tensor t = dtnet::Tensor::zeros(std::move(shape), requires_grad);
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

// Random values kept away from zero so ReLU finite differences stay clean.
inline dtnet::Tensor random_tensor_no_kink(std::vector<int> shape, dtnet::Rng& rng,
                                           bool requires_grad = false) {
  dtnet::Tensor t = random_tensor(std::move(shape), rng, requires_grad);
  for (std::size_t i = 0; i < t.numel(); ++i) {
    double& v = t.data()[i];
    if (std::abs(v) < 0.05) v = v < 0 ? v - 0.05 : v + 0.05;
  }
  return t;
}

inline double max_abs_diff(const dtnet::Tensor& a, const dtnet::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

inline double max_abs_diff(const dtnet::Tensor& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b[i]));
  }
  return m;
}

}  // namespace testutil
