#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "diffcode/tensor.hpp"

namespace diffcode {

// Handle into a tape. Only meaningful together with the tape that issued it.
using Var = std::int32_t;
inline constexpr Var kNoVar = -1;

// Wengert-list reverse-mode tape. Ops are recorded in execution order, so
// parents always precede consumers; backward() walks the list once in
// reverse. A tape is single-writer; independent tapes are independent.
template <class Scalar>
class TapeT {
  public:
    using BackwardFn = std::function<void(TapeT&, Var)>;

    Var leaf(TensorT<Scalar> value, bool requires_grad = false) {
        return push(value.all_finite(), "leaf", std::move(value), {}, nullptr, requires_grad);
    }

    Var record(const char* op, TensorT<Scalar> value, std::vector<Var> parents, BackwardFn fn) {
        bool rg = false;
        for (Var p : parents) {
            check(p >= 0 && p < static_cast<Var>(nodes_.size()), "tape: parent out of range");
            rg = rg || nodes_[static_cast<std::size_t>(p)].requires_grad;
        }
        const bool finite = value.all_finite();
        return push(finite, op, std::move(value), std::move(parents), rg ? std::move(fn) : nullptr, rg);
    }

    // Records a value that deliberately drops its gradient path.
    Var record_no_grad(const char* op, TensorT<Scalar> value) {
        const bool finite = value.all_finite();
        return push(finite, op, std::move(value), {}, nullptr, false);
    }

    std::size_t size() const { return nodes_.size(); }

    const TensorT<Scalar>& value(Var v) const { return node(v).value; }

    bool requires_grad(Var v) const { return node(v).requires_grad; }

    // Gradient of the last backward() w.r.t. node v. Zero tensor when the
    // node required a gradient but no path reached it.
    const TensorT<Scalar>& grad(Var v) {
        Node& n = node(v);
        check(n.requires_grad, "grad(): node does not require gradients");
        if (!n.grad_touched) {
            n.grad = TensorT<Scalar>::zeros(n.value.shape());
            n.grad_touched = true;
        }
        return n.grad;
    }

    // Mutable gradient accumulator for v, or nullptr when v does not take
    // gradients. Allocated to zeros on first touch.
    ArrayX<Scalar>* grad_accum(Var v) {
        Node& n = node(v);
        if (!n.requires_grad) return nullptr;
        if (!n.grad_touched) {
            n.grad = TensorT<Scalar>::zeros(n.value.shape());
            n.grad_touched = true;
        }
        return &n.grad.data();
    }

    void accumulate(Var v, const ArrayX<Scalar>& contribution) {
        if (ArrayX<Scalar>* g = grad_accum(v)) {
            check_shape(g->size() == contribution.size(), "gradient contribution size mismatch");
            *g += contribution;
        }
    }

    // Reverse pass from a scalar loss. Deterministic: same tape, same
    // gradients, bit for bit. Each node is visited exactly once.
    void backward(Var loss) {
        check(!nodes_.empty(), "backward: tape is empty");
        Node& ln = node(loss);
        check(ln.value.numel() == 1, "backward: loss must be a scalar");
        check(ln.requires_grad, "backward: loss does not depend on any differentiable leaf");
        clear_grads();
        ln.grad = TensorT<Scalar>::full(ln.value.shape(), Scalar(1));
        ln.grad_touched = true;
        for (Var v = loss; v >= 0; --v) {
            Node& n = node(v);
            if (!n.requires_grad || !n.grad_touched || !n.backward) continue;
            n.backward(*this, v);
        }
    }

    void clear_grads() {
        for (Node& n : nodes_) {
            n.grad_touched = false;
            n.grad = TensorT<Scalar>();
        }
    }

  private:
    struct Node {
        TensorT<Scalar> value;
        TensorT<Scalar> grad;
        std::vector<Var> parents;
        BackwardFn backward;
        const char* op = "";
        bool requires_grad = false;
        bool grad_touched = false;
    };

    Var push(bool finite, const char* op, TensorT<Scalar> value, std::vector<Var> parents, BackwardFn fn,
             bool requires_grad) {
        if (!finite) throw NumericError(std::string("non-finite values produced by op '") + op + "'");
        Node n;
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.backward = std::move(fn);
        n.op = op;
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return static_cast<Var>(nodes_.size() - 1);
    }

    Node& node(Var v) {
        check(v >= 0 && v < static_cast<Var>(nodes_.size()), "tape: bad var handle");
        return nodes_[static_cast<std::size_t>(v)];
    }

    const Node& node(Var v) const {
        check(v >= 0 && v < static_cast<Var>(nodes_.size()), "tape: bad var handle");
        return nodes_[static_cast<std::size_t>(v)];
    }

    std::vector<Node> nodes_;
};

using Tape = TapeT<float>;
using TapeD = TapeT<double>;

}  // namespace diffcode
