#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "ducd/common.hpp"

namespace ducd {

struct TensorImpl;

// One recorded operation. `inputs` keeps the producing tensors alive;
// `backward` reads the output's gradient and accumulates into the inputs'.
// The graph is rebuilt every forward pass (define-by-run).
struct Node {
  const char* op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(TensorImpl& out)> backward;
};

struct TensorImpl {
  std::vector<std::int64_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches it
  bool requires_grad = false;
  std::shared_ptr<Node> node;  // null for leaves

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? (data.empty() ? 0 : 1) : n;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

// Gradient recording switch (thread-local). Evaluation loops disable it to
// skip node construction entirely.
bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Shared-ownership handle over an n-d row-major double tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(std::vector<std::int64_t> shape);
  static Tensor ones(std::vector<std::int64_t> shape);
  static Tensor full(std::vector<std::int64_t> shape, double value);
  // Deterministic fill: identical (shape, seed, lo, hi) gives bitwise
  // identical contents on every platform.
  static Tensor uniform(std::vector<std::int64_t> shape, std::uint64_t seed,
                        double lo, double hi);
  static Tensor from_data(std::vector<std::int64_t> shape,
                          std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<std::int64_t>& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t dim(int i) const { return impl_->shape[i]; }
  std::int64_t numel() const { return impl_->numel(); }

  const double* data() const { return impl_->data.data(); }
  double* data() { return impl_->data.data(); }
  const std::vector<double>& values() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  // Only meaningful on leaves; interior tensors inherit it from inputs.
  Tensor& set_requires_grad(bool v);
  bool is_leaf() const { return impl_->node == nullptr; }

  bool has_grad() const { return !impl_->grad.empty(); }
  const double* grad() const { return impl_->grad.data(); }
  const std::vector<double>& grad_values() const { return impl_->grad; }
  void zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  }

  double item() const;
  double at(std::initializer_list<std::int64_t> idx) const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Reverse-mode sweep from a scalar loss. Visits each recorded node exactly
// once in reverse topological order; leaf gradients accumulate across calls,
// interior gradients are released as soon as they are consumed.
void backward(const Tensor& loss);

namespace detail {
Tensor make_tensor(std::vector<std::int64_t> shape, std::vector<double> data);
// Record `node` onto `out` when grad mode is on and any input requires grad.
void record(Tensor& out, const char* op,
            std::initializer_list<Tensor> inputs,
            std::function<void(TensorImpl&)> backward_fn);
std::int64_t checked_numel(const std::vector<std::int64_t>& shape);
}  // namespace detail

}  // namespace ducd
