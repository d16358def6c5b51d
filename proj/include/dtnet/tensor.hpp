#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace dtnet {

// Dense row-major array of 64-bit floats with an optional gradient buffer.
// Tensor is a shared handle: copies refer to the same storage, which is what
// gradient accumulation across multiple uses of a parameter requires.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value,
                     bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int dim(int i) const;
  int ndim() const;
  std::size_t numel() const;

  double* data();
  const double* data() const;
  double* grad();
  const double* grad() const;

  bool requires_grad() const;
  // Enables gradients and allocates a zeroed grad buffer.
  void set_requires_grad(bool on);
  void zero_grad();

  // Value of a single-element tensor.
  double item() const;

  // 4-d accessor for [N, C, H, W] tensors (tests and kernels).
  double& at(int n, int c, int h, int w);
  double at(int n, int c, int h, int w) const;

  // Deep copy of values (no grad, no history).
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

// Ordered record of executed differentiable operations. Replaying it
// backward visits operations in exact reverse execution order; every
// parameter's grad accumulates over all of its uses.
class Tape {
 public:
  void record(std::function<void()> backward_fn);
  // Seeds grad(loss) = 1 and replays the tape in reverse. `loss` must be a
  // single-element tensor produced while this tape was active.
  void backward(const Tensor& loss);
  std::size_t size() const { return steps_.size(); }
  void clear() { steps_.clear(); }

  // Tape active on the current thread, or nullptr when evaluation is not
  // being recorded.
  static Tape* current();

 private:
  friend class TapeScope;
  std::vector<std::function<void()>> steps_;
};

// RAII activation of a tape for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace dtnet
