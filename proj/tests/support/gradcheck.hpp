#pragma once

// Central finite-difference gradient checks. The analytic gradient comes
// from one taped forward/backward; the reference comes from two untaped
// forward evaluations per element.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <doctest.h>

#include "dtnet/tensor.hpp"

namespace gradcheck {

struct Result {
  double max_rel_err = 0.0;
  std::string where;
};

// f must rebuild its whole computation from the current contents of the
// input tensors on every call and return a scalar tensor.
inline Result check(const std::function<dtnet::Tensor()>& f,
                    std::vector<dtnet::Tensor> inputs, double step = 1e-5) {
  using dtnet::Tape;
  using dtnet::TapeScope;
  using dtnet::Tensor;

  for (auto& t : inputs) t.zero_grad();
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = f();
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) {
    analytic.emplace_back(t.grad(), t.grad() + t.numel());
  }

  Result r;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor& t = inputs[ti];
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + step;
      const double plus = f().item();
      t.data()[i] = saved - step;
      const double minus = f().item();
      t.data()[i] = saved;
      const double fd = (plus - minus) / (2.0 * step);
      const double rel =
          std::abs(analytic[ti][i] - fd) / std::max(1.0, std::abs(fd));
      if (rel > r.max_rel_err) {
        r.max_rel_err = rel;
        r.where = "input " + std::to_string(ti) + " element " + std::to_string(i);
      }
    }
  }
  return r;
}

inline void require_pass(const std::function<dtnet::Tensor()>& f,
                         std::vector<dtnet::Tensor> inputs, double tol = 1e-4,
                         double step = 1e-5) {
  const Result r = check(f, std::move(inputs), step);
  INFO("max relative error ", r.max_rel_err, " at ", r.where);
  CHECK(r.max_rel_err < tol);
}

}  // namespace gradcheck
