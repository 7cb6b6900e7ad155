#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "aedf/common.hpp"

namespace aedf {

/// Dense row-major tensor handle. Copies share the underlying storage;
/// forward ops never mutate their inputs, so shared handles behave as values.
/// The scalar type is a template parameter: float for training, double for
/// the finite-difference check mode.
template <typename S>
class TensorT {
   public:
    TensorT() = default;

    explicit TensorT(Shape shape, S fill = S(0)) {
        validate_shape(shape);
        node_ = std::make_shared<Node>();
        node_->shape = std::move(shape);
        node_->data.assign(shape_numel(node_->shape), fill);
    }

    static TensorT scalar(S v) {
        TensorT t(Shape{1});
        t.data()[0] = v;
        return t;
    }

    static TensorT from_data(Shape shape, std::vector<S> data) {
        validate_shape(shape);
        if (shape_numel(shape) != data.size())
            throw DimensionError(cat("tensor data length ", data.size(),
                                     " does not match shape ", shape_str(shape)));
        TensorT t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = std::move(shape);
        t.node_->data = std::move(data);
        return t;
    }

    bool valid() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return node_->data.size(); }

    S* data() { return node_->data.data(); }
    const S* data() const { return node_->data.data(); }
    std::vector<S>& values() { return node_->data; }
    const std::vector<S>& values() const { return node_->data; }

    S item() const {
        if (size() != 1) throw ContractError(cat("item() on non-scalar tensor ", shape_str(shape())));
        return node_->data[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }

    bool has_grad() const { return !node_->grad.empty(); }

    /// Allocates a zeroed gradient if absent.
    void ensure_grad() {
        if (node_->grad.empty()) node_->grad.assign(node_->data.size(), S(0));
    }

    void zero_grad() { node_->grad.assign(node_->data.size(), S(0)); }
    void drop_grad() { node_->grad.clear(); }

    S* grad() { return node_->grad.data(); }
    const S* grad() const { return node_->grad.data(); }
    std::vector<S>& grad_values() { return node_->grad; }
    const std::vector<S>& grad_values() const { return node_->grad; }

    /// True when two handles refer to the same storage.
    bool same_storage(const TensorT& other) const { return node_ == other.node_; }

    bool same_shape(const TensorT& other) const { return shape() == other.shape(); }

    bool all_finite() const {
        for (S v : node_->data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    TensorT clone() const {
        TensorT t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = node_->shape;
        t.node_->data = node_->data;
        t.node_->requires_grad = node_->requires_grad;
        return t;
    }

   private:
    struct Node {
        Shape shape;
        std::vector<S> data;
        std::vector<S> grad;  // empty until a backward pass touches it
        bool requires_grad = false;
    };

    static void validate_shape(const Shape& shape) {
        if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
        for (int d : shape)
            if (d <= 0) throw DimensionError(cat("non-positive dimension in shape ", shape_str(shape)));
    }

    std::shared_ptr<Node> node_;
};

/// Append-only record of executed differentiable operations. Ops run eagerly;
/// each records one backward step. backward() replays the steps in reverse,
/// which visits every node exactly once because recording order is a
/// topological order of the forward graph.
template <typename S>
class TapeT {
   public:
    void record(std::function<void()> backward_step) { steps_.push_back(std::move(backward_step)); }

    std::size_t node_count() const { return steps_.size(); }

    /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
    /// requires_grad tensor reachable from the loss. Gradients add onto
    /// whatever is already stored; callers zero them between optimizer steps.
    void backward(TensorT<S>& loss) {
        if (loss.size() != 1)
            throw ContractError(cat("backward() requires a scalar loss, got ", shape_str(loss.shape())));
        if (!loss.requires_grad())
            throw ContractError("backward() loss was not produced through recorded operations");
        loss.ensure_grad();
        loss.grad()[0] += S(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
        steps_.clear();
    }

   private:
    std::vector<std::function<void()>> steps_;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace aedf
