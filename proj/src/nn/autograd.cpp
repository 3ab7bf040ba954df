#include "vfr/nn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "vfr/error.hpp"

namespace vfr::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Shape::str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
    require(values_.size() == shape_.numel(), ErrorCode::invalid_input,
            "tensor data length does not match shape " + shape_.str());
}

double Tensor::item() const {
    require(values_.size() == 1, ErrorCode::invalid_input, "item() on a non-scalar tensor " + shape_.str());
    return values_[0];
}

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Tensor& Node::grad_buffer() {
    if (grad.empty()) grad = Tensor(value.shape(), 0.0);
    return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var make_op(Tensor value, const std::vector<Var>& parents, std::function<void(Node&)> fn) {
    Var out(std::move(value));
    if (!g_grad_enabled) return out;
    const bool any = std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p.requires_grad(); });
    if (!any) return out;
    out.node_->requires_grad = true;
    out.node_->parents.reserve(parents.size());
    for (const Var& p : parents) out.node_->parents.push_back(p.node());
    out.node_->backward_fn = std::move(fn);
    return out;
}

void backward(const Var& root) {
    require(root.defined() && root.value().numel() == 1, ErrorCode::invalid_input,
            "backward() needs a scalar root");
    if (!root.requires_grad()) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent && parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->grad_buffer().fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace vfr::nn
