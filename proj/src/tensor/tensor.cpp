#include "affect/tensor/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "affect/error.hpp"

namespace affect {
namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->data.assign(shape_numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_string(shape));
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
    return node_->data[0];
}

Tensor Tensor::clone(bool requires_grad) const { return from(shape(), node_->data, requires_grad); }

std::vector<double>& GradTable::at(const Tensor& t) { return at(t.node(), t.numel()); }

std::vector<double>& GradTable::at(const TensorNode* node, std::size_t numel) {
    auto [it, inserted] = buffers_.try_emplace(node);
    if (inserted) it->second.assign(numel, 0.0);
    return it->second;
}

const std::vector<double>* GradTable::find(const Tensor& t) const { return find(t.node()); }

const std::vector<double>* GradTable::find(const TensorNode* node) const {
    auto it = buffers_.find(node);
    return it == buffers_.end() ? nullptr : &it->second;
}

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward) {
    ops_.push_back(Op{std::move(inputs), std::move(output), std::move(backward)});
}

GradTable Tape::gradients(const Tensor& loss) const {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " +
                            (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
    }
    GradTable grads;
    grads.at(loss)[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        const std::vector<double>* g = grads.find(it->output);
        if (g == nullptr) continue;
        // unordered_map keeps element references valid across rehashing, so
        // the op may allocate input buffers while reading grad_out.
        it->backward(*g, grads);
    }
    return grads;
}

std::vector<Tensor> Tape::leaves() const {
    std::unordered_set<const TensorNode*> produced;
    for (const auto& op : ops_) produced.insert(op.output.node());
    std::unordered_set<const TensorNode*> seen;
    std::vector<Tensor> out;
    for (const auto& op : ops_) {
        for (const auto& in : op.inputs) {
            if (!in.requires_grad() || produced.count(in.node()) || !seen.insert(in.node()).second) continue;
            out.push_back(in);
        }
    }
    return out;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (g_active_tape == nullptr) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

GradTable backward(const Tensor& loss, const Tape& tape) {
    GradTable grads = tape.gradients(loss);
    for (Tensor leaf : tape.leaves()) {
        const std::vector<double>* g = grads.find(leaf);
        if (g == nullptr) continue;
        TensorNode* node = leaf.node();
        if (node->grad.size() != g->size()) node->grad.assign(g->size(), 0.0);
        for (std::size_t i = 0; i < g->size(); ++i) node->grad[i] += (*g)[i];
    }
    return grads;
}

}  // namespace affect
