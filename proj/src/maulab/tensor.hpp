#ifndef MAULAB_TENSOR_HPP
#define MAULAB_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "maulab/error.hpp"

namespace maulab {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

// Dense row-major float64 tensor with a reverse-mode tape. Values are
// immutable once produced; parameters mutate only through the optimizer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
  int64_t dim(size_t axis) const { return node_->shape.at(axis); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> data() const { return node_->value; }
  std::span<const double> grad() const;

  double item() const;
  double at(std::initializer_list<int64_t> idx) const;

  const std::string& name() const { return node_->name; }
  void set_name(std::string name) { node_->name = std::move(name); }

  // Parameter mutation hooks for the optimizer; not part of graph building.
  std::vector<double>& mutable_value() { return node_->value; }
  void zero_grad();
  void accumulate_grad(std::span<const double> g);

  Tensor detached() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// While a guard is alive no tape is recorded; ops produce detached values.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Populates gradients of every parameter reachable from `loss`; parameters in
// `params` that the loss does not touch end up with zero gradients.
void backward(const Tensor& loss, std::span<const Tensor> params);

void zero_grads(std::span<Tensor> params);

namespace detail {

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<std::shared_ptr<Node>> parents,
                   std::function<void(Node&)> backward_fn);

}  // namespace detail

}  // namespace maulab

#endif
