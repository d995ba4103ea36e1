#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace ino {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

template <class T>
class Tensor;

namespace detail {

template <class T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    bool leaf = true;
    std::string label;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into parents' grads.
    std::function<void(Node&)> backward_fn;

    std::vector<T>& ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
        return grad;
    }
};

}  // namespace detail

/// Dense row-major array with reverse-mode differentiation.
///
/// A Tensor is a shared handle; copies alias the same node. Operations build
/// new nodes and never write to their inputs. A result records its inputs
/// only when at least one of them requires a gradient, so computations on
/// tensors without requires_grad (teacher weights, data) build no graph.
template <class T>
class Tensor {
public:
    using value_type = T;
    using Node = detail::Node<T>;

    Tensor() : node_(std::make_shared<Node>()) { node_->shape = {0}; }

    Tensor(Shape shape, std::vector<T> data, bool requires_grad = false) : node_(std::make_shared<Node>()) {
        for (auto e : shape) {
            if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
        }
        if (shape_numel(shape) != data.size()) {
            throw ShapeError("shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
        }
        node_->shape = std::move(shape);
        node_->data = std::move(data);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        const auto n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
    }
    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        const auto n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
    }
    static Tensor scalar(T value, bool requires_grad = false) { return Tensor({1}, {value}, requires_grad); }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->data.size(); }
    bool empty() const { return node_->data.empty(); }

    std::span<const T> data() const { return node_->data; }
    std::span<const T> grad() const { return node_->grad; }
    bool has_grad() const { return node_->grad.size() == node_->data.size() && !node_->data.empty(); }
    T operator[](std::size_t i) const { return node_->data[i]; }
    T item() const {
        if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
        return node_->data[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool is_leaf() const { return node_->leaf; }

    const std::string& label() const { return node_->label; }
    Tensor& set_label(std::string l) {
        node_->label = std::move(l);
        return *this;
    }

    /// Only meaningful on leaves; intermediate results inherit the flag.
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    void zero_grad() { node_->grad.clear(); }

    /// In-place write of leaf values; used by optimizers and EMA updates that
    /// live outside any graph.
    std::span<T> mutable_data() {
        if (!node_->leaf) throw std::logic_error("mutable_data() on a non-leaf tensor");
        return node_->data;
    }

    /// New leaf sharing no storage and no graph with this tensor.
    Tensor detach() const { return Tensor(shape(), node_->data, false); }

    Tensor clone(bool requires_grad) const { return Tensor(shape(), node_->data, requires_grad); }

    template <class U>
    Tensor<U> cast() const {
        std::vector<U> out(numel());
        std::transform(node_->data.begin(), node_->data.end(), out.begin(), [](T v) { return static_cast<U>(v); });
        return Tensor<U>(shape(), std::move(out), false);
    }

    // Graph construction used by kernel implementations.
    static Tensor make_result(Shape shape, std::vector<T> data, std::vector<Tensor> inputs,
                              std::function<void(Node&)> backward) {
        Tensor out(std::move(shape), std::move(data), false);
        const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
        if (any) {
            out.node_->requires_grad = true;
            out.node_->leaf = false;
            out.node_->parents.reserve(inputs.size());
            for (auto& in : inputs) out.node_->parents.push_back(in.node_);
            out.node_->backward_fn = std::move(backward);
        }
        return out;
    }

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Accumulates d(root)/d(leaf) into the grad of every reachable leaf that
/// requires a gradient.
///
/// Leaf gradients accumulate across calls: call zero_grad() on parameters
/// between steps. Gradients of intermediate nodes are reset at the start of
/// every call.
template <class T>
void backward(const Tensor<T>& root) {
    using Node = detail::Node<T>;
    if (root.numel() != 1) throw ShapeError("backward() needs a scalar root, got " + shape_str(root.shape()));
    if (!root.requires_grad()) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    for (Node* n : order) {
        if (!n->leaf) n->grad.assign(n->data.size(), T(0));
    }
    root.node()->ensure_grad()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->leaf && n->backward_fn) n->backward_fn(*n);
    }
}

}  // namespace ino
