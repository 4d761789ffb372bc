#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "paraflame/tensor.hpp"

// Reverse-mode differentiation over dense tensors. Graphs are built per
// forward pass; Parameters are persistent leaves shared across graphs.
// Complex values differentiate as independent (re, im) pairs of a real-valued
// loss; no holomorphic convention anywhere.

namespace paraflame::ad {

class Node;
using NodeRef = std::shared_ptr<Node>;

class Node {
  public:
    Tensor value;
    Tensor grad;  // zero-initialized by backward() before each pass
    std::vector<NodeRef> parents;
    std::function<void(Node&)> backprop;  // reads grad, accumulates into parents' grad
    std::string param_name;               // non-empty marks a Parameter leaf
    bool trainable = false;
    bool needs_grad = false;
    const char* op = "leaf";
};

/// Thread-local switch: while active, ops compute values only (no tape).
class NoGradGuard {
  public:
    NoGradGuard() : prev_(flag()) { flag() = true; }
    ~NoGradGuard() { flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
    static bool active() { return flag(); }

  private:
    static bool& flag() {
        thread_local bool f = false;
        return f;
    }
    bool prev_;
};

/// Leaf that never receives gradients (inputs, targets, frozen values).
inline NodeRef constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return n;
}

/// Leaf whose gradient is wanted (readable from node->grad after backward).
inline NodeRef variable(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->needs_grad = !NoGradGuard::active();
    return n;
}

/// Named trainable leaf. Names must be unique within one model.
struct Parameter {
    NodeRef node;

    Parameter() = default;
    Parameter(std::string name, Tensor value, bool trainable = true) {
        node = std::make_shared<Node>();
        node->value = std::move(value);
        node->param_name = std::move(name);
        node->trainable = trainable;
        node->needs_grad = trainable;
    }
    const std::string& name() const { return node->param_name; }
    Tensor& tensor() { return node->value; }
    const Tensor& tensor() const { return node->value; }
    bool trainable() const { return node->trainable; }
};

/// Interior node; drops the tape if nothing upstream needs gradients.
inline NodeRef make_node(const char* op, Tensor value, std::vector<NodeRef> parents,
                         std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->value = std::move(value);
    if (!NoGradGuard::active()) {
        for (const auto& p : parents)
            if (p->needs_grad) {
                n->needs_grad = true;
                break;
            }
        if (n->needs_grad) {
            n->parents = std::move(parents);
            n->backprop = std::move(backprop);
        }
    }
    return n;
}

using GradMap = std::map<std::string, Tensor>;

namespace detail {

// Iterative post-order DFS; child order is fixed, so traversal (and therefore
// floating-point accumulation order) is identical run to run.
inline std::vector<Node*> topo_order(Node* root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;  // parents before children; reverse for backprop
}

}  // namespace detail

/// Reverse-mode pass from a scalar loss. Returns gradients for every trainable
/// Parameter reachable from the loss, keyed by parameter name.
inline GradMap backward(const NodeRef& loss) {
    if (loss->value.numel() != 1 || loss->value.dtype != Dtype::Real)
        throw ContractError("backward: loss must be a real scalar, got " +
                            loss->value.shape_string());
    auto order = detail::topo_order(loss.get());
    for (Node* n : order) {
        n->grad = Tensor::zeros(n->value.shape, n->value.dtype);
    }
    loss->grad.data[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop) n->backprop(*n);
    }
    GradMap grads;
    for (Node* n : order) {
        if (n->trainable && !n->param_name.empty()) grads.emplace(n->param_name, n->grad);
    }
    return grads;
}

}  // namespace paraflame::ad
