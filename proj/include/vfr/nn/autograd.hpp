#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vfr/nn/tensor.hpp"

namespace vfr::nn {

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    Tensor& grad_buffer();
};

/// Handle to a value in the autograd tape. Copies share the node.
class Var {
  public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const noexcept { return node_ && node_->requires_grad; }

    /// Gradient accumulated by backward(); empty when nothing flowed here.
    const Tensor& grad() const { return node_->grad; }
    void zero_grad() { node_->grad = Tensor(); }

    const std::shared_ptr<Node>& node() const noexcept { return node_; }

  private:
    friend Var make_op(Tensor value, const std::vector<Var>& parents, std::function<void(Node&)> fn);
    std::shared_ptr<Node> node_;
};

/// Records an op result. The closure receives the result node (whose grad is
/// populated) and must accumulate into parents that require grad.
Var make_op(Tensor value, const std::vector<Var>& parents, std::function<void(Node&)> fn);

/// Reverse sweep from a scalar root.
void backward(const Var& root);

bool grad_enabled() noexcept;

/// Disables tape recording on this thread for its lifetime (inference).
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

}  // namespace vfr::nn
