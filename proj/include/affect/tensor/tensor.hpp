#pragma once

// Dense row-major tensors of 64-bit reals and the reverse-mode tape that
// records differentiable operations on them.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace affect {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until a backward pass reaches this leaf
};

/// Shared handle to a tensor node. Copies alias the same storage; values
/// produced by operations are never modified afterwards.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<const double> data() const { return node_->data; }
    // Mutable access is reserved for parameter initialization and optimizer
    // updates; never call it on a tensor recorded on a live tape.
    std::span<double> mutable_data() { return node_->data; }
    double item() const;
    double operator[](std::size_t i) const { return node_->data[i]; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad() { node_->grad.clear(); }

    const TensorNode* node() const { return node_.get(); }
    TensorNode* node() { return node_.get(); }

    /// Deep copy with fresh storage.
    Tensor clone(bool requires_grad) const;

private:
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<TensorNode> node_;
};

/// Gradient buffers produced by one backward pass, keyed by tensor node.
/// Kept separate from TensorNode::grad so concurrent tapes over shared
/// parameters never write to the same memory.
class GradTable {
public:
    /// Buffer for `t`, allocated as zeros on first use.
    std::vector<double>& at(const Tensor& t);
    std::vector<double>& at(const TensorNode* node, std::size_t numel);
    const std::vector<double>* find(const Tensor& t) const;
    const std::vector<double>* find(const TensorNode* node) const;

private:
    std::unordered_map<const TensorNode*, std::vector<double>> buffers_;
};

/// Ordered record of differentiable operations.
class Tape {
public:
    using BackwardFn = std::function<void(std::span<const double> grad_out, GradTable& grads)>;

    void record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward);
    std::size_t size() const { return ops_.size(); }
    void clear() { ops_.clear(); }

    /// Runs the recorded operations in reverse order and returns every
    /// gradient reached from `loss`. Does not touch TensorNode::grad.
    GradTable gradients(const Tensor& loss) const;

    /// Leaves reached by the tape (inputs that no recorded op produced).
    std::vector<Tensor> leaves() const;

private:
    struct Op {
        std::vector<Tensor> inputs;
        Tensor output;
        BackwardFn backward;
    };
    std::vector<Op> ops_;
};

/// Installs a tape as the thread's recording target for its lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

Tape* active_tape();

/// True when an operation on these inputs must be recorded.
bool should_record(std::initializer_list<const Tensor*> inputs);

/// Backpropagates a scalar loss through `tape` and accumulates the result into
/// the grad field of every requires_grad leaf.
GradTable backward(const Tensor& loss, const Tape& tape);

}  // namespace affect
