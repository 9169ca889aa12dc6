#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "vpnext/tensor.hpp"

namespace vpnext {

template <typename T>
class Tape;

/// Handle into a tape node. Cheap to copy; owns nothing.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    bool defined() const { return tape != nullptr && id >= 0; }
    const Shape& shape() const;
    const TensorData<T>& value() const;
    TensorData<T> grad() const;
    std::int64_t size() const { return value().size(); }
};

/// Wengert list over TensorData values. One tape owns one graph; construction
/// and backward are single-threaded per tape. Node order is execution order,
/// so backward walks ids in reverse and visits each node exactly once.
template <typename T>
class Tape {
  public:
    using BackFn = std::function<void(Tape&, int)>;

    Var<T> leaf(TensorData<T> value, bool requires_grad = false) {
        return push("leaf", std::move(value), {}, nullptr, requires_grad);
    }

    Var<T> constant(TensorData<T> value) { return leaf(std::move(value), false); }

    Var<T> make(const char* op, TensorData<T> value, std::vector<int> inputs, BackFn back) {
        bool req = false;
        for (int i : inputs) req = req || nodes_[static_cast<std::size_t>(i)].requires_grad;
        if (finite_checks_ && !value.all_finite())
            throw NonFiniteError(std::string("non-finite values in output of op '") + op + "'");
        return push(op, std::move(value), std::move(inputs), std::move(back), req);
    }

    /// Seeds d(root)/d(root)=1 and propagates in reverse execution order.
    /// Grads of nodes the root does not depend on stay exactly zero.
    void backward(Var<T> root) {
        require_shape(root.tape == this, "backward: var belongs to another tape");
        auto& rn = nodes_[static_cast<std::size_t>(root.id)];
        require_shape(rn.value.size() == 1, "backward: root must be scalar, got " + shape_str(rn.value.shape));
        for (auto& n : nodes_) {
            if (!n.grad.empty()) std::fill(n.grad.begin(), n.grad.end(), T(0));
        }
        grad_buf(root.id)[0] = T(1);
        for (int id = root.id; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (!n.requires_grad || !n.back || n.grad.empty()) continue;
            n.back(*this, id);
        }
    }

    const TensorData<T>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    TensorData<T>& value(int id) { return nodes_[static_cast<std::size_t>(id)].value; }

    bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

    /// Gradient accumulation buffer, allocated (zeroed) on first touch.
    /// Returns nullptr if the node does not require grad.
    T* grad_acc(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad) return nullptr;
        return grad_buf(id);
    }

    /// Incoming gradient of a node during backward (may be empty if unused).
    const std::vector<T>& grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    TensorData<T> grad(Var<T> v) const {
        const Node& n = nodes_[static_cast<std::size_t>(v.id)];
        TensorData<T> g(n.value.shape);
        if (!n.grad.empty()) g.data = n.grad;
        return g;
    }

    std::size_t num_nodes() const { return nodes_.size(); }
    const char* op_name(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }

    void set_finite_checks(bool on) { finite_checks_ = on; }

  private:
    struct Node {
        TensorData<T> value;
        std::vector<T> grad;  // lazily sized to value.size()
        std::vector<int> inputs;
        BackFn back;
        const char* op;
        bool requires_grad;
    };

    Var<T> push(const char* op, TensorData<T> value, std::vector<int> inputs, BackFn back, bool req) {
        Node n;
        n.value = std::move(value);
        n.inputs = std::move(inputs);
        n.back = std::move(back);
        n.op = op;
        n.requires_grad = req;
        nodes_.push_back(std::move(n));
        return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
    }

    T* grad_buf(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.empty()) n.grad.assign(n.value.data.size(), T(0));
        return n.grad.data();
    }

    std::vector<Node> nodes_;
    bool finite_checks_ = true;
};

template <typename T>
const Shape& Var<T>::shape() const {
    return tape->value(id).shape;
}

template <typename T>
const TensorData<T>& Var<T>::value() const {
    return tape->value(id);
}

template <typename T>
TensorData<T> Var<T>::grad() const {
    return tape->grad(*this);
}

}  // namespace vpnext
