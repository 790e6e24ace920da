#include "maulab/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace maulab {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) fail(ErrorKind::InvalidArgument, "negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  int64_t n = shape_numel(shape);
  node->shape = std::move(shape);
  node->value.assign(static_cast<size_t>(n), fill);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(data.size())) {
    fail(ErrorKind::InvalidArgument,
         "tensor data length " + std::to_string(data.size()) +
             " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({}, {v}, requires_grad);
}

std::span<const double> Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::item() const {
  if (numel() != 1) {
    fail(ErrorKind::InvalidArgument,
         "item() on non-scalar tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  const Shape& s = node_->shape;
  if (idx.size() != s.size()) {
    fail(ErrorKind::InvalidArgument, "index rank mismatch for shape " + shape_str(s));
  }
  int64_t flat = 0;
  size_t k = 0;
  for (int64_t i : idx) {
    if (i < 0 || i >= s[k]) fail(ErrorKind::InvalidArgument, "index out of range");
    flat = flat * s[k] + i;
    ++k;
  }
  return node_->value[static_cast<size_t>(flat)];
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->value.size(), 0.0);
}

void Tensor::accumulate_grad(std::span<const double> g) {
  node_->ensure_grad();
  if (g.size() != node_->grad.size()) {
    fail(ErrorKind::InvalidArgument, "gradient size mismatch");
  }
  for (size_t i = 0; i < g.size(); ++i) node_->grad[i] += g[i];
}

Tensor Tensor::detached() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  node->requires_grad = false;
  return Tensor(std::move(node));
}

namespace detail {

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<std::shared_ptr<Node>> parents,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(value.size())) {
    fail(ErrorKind::Internal, "op produced value of wrong size for shape " + shape_str(shape));
  }
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool track = grad_enabled();
  bool any_parent_grad = false;
  if (track) {
    for (const auto& p : parents) any_parent_grad = any_parent_grad || p->requires_grad;
  }
  if (track && any_parent_grad) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

void backward(const Tensor& loss, std::span<const Tensor> params) {
  if (!loss.defined() || loss.numel() != 1) {
    fail(ErrorKind::Contract, "backward requires a scalar loss");
  }
  for (const Tensor& p : params) p.node()->ensure_grad();

  auto root = loss.node();
  if (!root->requires_grad) return;  // loss detached from every parameter

  // Iterative post-order DFS for the topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  struct Frame {
    detail::Node* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      detail::Node* parent = top.node->parents[top.next_parent++].get();
      if (parent->requires_grad && !seen.count(parent)) {
        seen.insert(parent);
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }

  for (detail::Node* node : order) node->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward) node->backward(*node);
  }
}

void zero_grads(std::span<Tensor> params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace maulab
