#include "dtnet/tensor.hpp"

#include <numeric>
#include <string>

#include "dtnet/errors.hpp"

namespace dtnet {

namespace {

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("tensor dimension must be non-negative, got " + std::to_string(d));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

thread_local Tape* g_active_tape = nullptr;

}  // namespace

struct Tensor::Impl {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
};

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data.assign(n, 0.0);
  if (requires_grad) t.set_requires_grad(true);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data,
                    bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  if (n != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape volume " + std::to_string(n));
  }
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(data);
  if (requires_grad) t.set_requires_grad(true);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }

int Tensor::dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }

int Tensor::ndim() const { return static_cast<int>(impl_->shape.size()); }

std::size_t Tensor::numel() const { return impl_->data.size(); }

double* Tensor::data() { return impl_->data.data(); }
const double* Tensor::data() const { return impl_->data.data(); }

double* Tensor::grad() { return impl_->requires_grad ? impl_->grad.data() : nullptr; }
const double* Tensor::grad() const {
  return impl_->requires_grad ? impl_->grad.data() : nullptr;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  if (on) {
    impl_->grad.assign(impl_->data.size(), 0.0);
  } else {
    impl_->grad.clear();
  }
}

void Tensor::zero_grad() {
  if (impl_->requires_grad) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() requires a single-element tensor, got " +
                        std::to_string(numel()) + " elements");
  }
  return impl_->data[0];
}

double& Tensor::at(int n, int c, int h, int w) {
  const auto& s = impl_->shape;
  if (s.size() != 4) throw ShapeError("at(n,c,h,w) requires a 4-d tensor");
  return impl_->data[((static_cast<std::size_t>(n) * s[1] + c) * s[2] + h) * s[3] + w];
}

double Tensor::at(int n, int c, int h, int w) const {
  return const_cast<Tensor*>(this)->at(n, c, h, w);
}

Tensor Tensor::clone() const {
  return Tensor::from(impl_->shape, impl_->data);
}

void Tape::record(std::function<void()> backward_fn) {
  steps_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got " +
                        std::to_string(loss.numel()) + " elements");
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() requires a loss produced through the tape");
  }
  const_cast<Tensor&>(loss).grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

Tape* Tape::current() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

}  // namespace dtnet
