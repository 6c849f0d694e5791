#include "ducd/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "ducd/rng.hpp"

namespace ducd {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

namespace detail {

std::int64_t checked_numel(const std::vector<std::int64_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must not be empty");
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0)
      throw ShapeError(cat("invalid dimension ", d, "; all dims must be >= 1"));
    n *= d;
  }
  return n;
}

Tensor make_tensor(std::vector<std::int64_t> shape,
                   std::vector<double> data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return Tensor(std::move(impl));
}

void record(Tensor& out, const char* op,
            std::initializer_list<Tensor> inputs,
            std::function<void(TensorImpl&)> backward_fn) {
  if (!g_grad_enabled) return;
  bool needs = false;
  for (const auto& t : inputs) needs = needs || t.impl()->requires_grad;
  if (!needs) return;
  auto node = std::make_shared<Node>();
  node->op = op;
  node->inputs.reserve(inputs.size());
  for (const auto& t : inputs) node->inputs.push_back(t.impl());
  node->backward = std::move(backward_fn);
  out.impl()->node = std::move(node);
  out.impl()->requires_grad = true;
}

}  // namespace detail

Tensor Tensor::zeros(std::vector<std::int64_t> shape) {
  auto n = detail::checked_numel(shape);
  return detail::make_tensor(std::move(shape),
                             std::vector<double>(static_cast<std::size_t>(n)));
}

Tensor Tensor::ones(std::vector<std::int64_t> shape) {
  return full(std::move(shape), 1.0);
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double value) {
  auto n = detail::checked_numel(shape);
  return detail::make_tensor(
      std::move(shape),
      std::vector<double>(static_cast<std::size_t>(n), value));
}

Tensor Tensor::uniform(std::vector<std::int64_t> shape, std::uint64_t seed,
                       double lo, double hi) {
  auto n = detail::checked_numel(shape);
  if (!(lo < hi))
    throw ValueError(cat("uniform fill requires lo < hi, got [", lo, ", ", hi,
                         ")"));
  Rng rng(seed);
  std::vector<double> data(static_cast<std::size_t>(n));
  for (auto& v : data) v = rng.uniform(lo, hi);
  return detail::make_tensor(std::move(shape), std::move(data));
}

Tensor Tensor::from_data(std::vector<std::int64_t> shape,
                         std::vector<double> values) {
  auto n = detail::checked_numel(shape);
  if (static_cast<std::size_t>(n) != values.size())
    throw ShapeError(cat("data length ", values.size(),
                         " does not match shape product ", n));
  return detail::make_tensor(std::move(shape), std::move(values));
}

Tensor& Tensor::set_requires_grad(bool v) {
  if (impl_->node != nullptr)
    throw ValueError("requires_grad can only be toggled on leaf tensors");
  impl_->requires_grad = v;
  return *this;
}

double Tensor::item() const {
  if (numel() != 1)
    throw ValueError(cat("item() on tensor with ", numel(), " elements"));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
  const auto& sh = impl_->shape;
  if (idx.size() != sh.size())
    throw ShapeError(cat("at(): ", idx.size(), " indices for rank ",
                         sh.size(), " tensor"));
  std::int64_t flat = 0;
  int i = 0;
  for (auto v : idx) {
    if (v < 0 || v >= sh[i])
      throw ShapeError(cat("at(): index ", v, " out of range for dim ", i));
    flat = flat * sh[i] + v;
    ++i;
  }
  return impl_->data[static_cast<std::size_t>(flat)];
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ValueError("backward on undefined tensor");
  if (loss.numel() != 1)
    throw ValueError(cat("backward requires a scalar loss, got ",
                         loss.numel(), " elements"));
  if (loss.impl()->node == nullptr)
    throw ValueError(
        "backward on a detached tensor: no recorded operations lead here");

  // Topological order via iterative post-order DFS, then reverse sweep.
  std::vector<TensorImpl*> topo;
  std::unordered_set<Node*> seen;
  struct Frame {
    TensorImpl* t;
    std::size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.impl().get(), 0});
  seen.insert(loss.impl()->node.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    Node* node = f.t->node.get();
    if (f.next_input < node->inputs.size()) {
      TensorImpl* in = node->inputs[f.next_input++].get();
      if (in->node != nullptr && seen.insert(in->node.get()).second)
        stack.push_back({in, 0});
    } else {
      topo.push_back(f.t);
      stack.pop_back();
    }
  }

  auto& lg = loss.impl()->grad;
  lg.assign(1, 1.0);

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorImpl* t = *it;
    t->ensure_grad();
    t->node->backward(*t);
    // Interior gradients are complete once their node ran; release them.
    std::vector<double>().swap(t->grad);
  }
}

}  // namespace ducd
