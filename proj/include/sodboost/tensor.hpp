#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <utility>
#include <vector>

#include "sodboost/common.hpp"

namespace sodboost {

template <typename T>
class Tape;

// A learnable value owned by a module. `grad` is only meaningful while
// `has_grad` is set; parameters whose tape nodes were never reached by
// backward keep has_grad == false and are skipped by the optimizer.
template <typename T>
struct Parameter {
    std::string name;
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<T> velocity;
    bool has_grad = false;

    Parameter() = default;

    void init(Shape s, std::vector<T> v) {
        shape = std::move(s);
        value = std::move(v);
        require_shape(static_cast<int64_t>(value.size()) == numel(shape),
                      "parameter value size does not match shape " + shape_str(shape));
        grad.assign(value.size(), T(0));
        velocity.assign(value.size(), T(0));
        has_grad = false;
    }

    void zero_grad() {
        std::fill(grad.begin(), grad.end(), T(0));
        has_grad = false;
    }

    int64_t size() const { return static_cast<int64_t>(value.size()); }
};

// Immutable dense value. Once created the element buffer never changes;
// downstream ops share it by reference. A tensor optionally carries the
// identity of the tape node that produced it.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    static Tensor zeros(Shape shape) {
        return Tensor(std::move(shape), nullptr, -1, true);
    }

    static Tensor full(Shape shape, T fill) {
        Tensor t(std::move(shape), nullptr, -1, true);
        std::fill(t.mutable_values().begin(), t.mutable_values().end(), fill);
        return t;
    }

    static Tensor scalar(T v) { return from(Shape{}, std::vector<T>{v}); }

    static Tensor from(Shape shape, std::vector<T> values) {
        require_shape(static_cast<int64_t>(values.size()) == numel(shape),
                      "value count " + std::to_string(values.size()) +
                          " does not match shape " + shape_str(shape));
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::make_shared<std::vector<T>>(std::move(values));
        return t;
    }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }

    int dim(int i) const {
        const int r = rank();
        if (i < 0) i += r;
        require_shape(i >= 0 && i < r, "dim index out of range for " + shape_str(shape_));
        return shape_[i];
    }

    int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

    const std::vector<T>& values() const { return *data_; }
    const T* data() const { return data_->data(); }

    T value() const {
        require_shape(size() == 1, "Tensor::value requires a one-element tensor, got " +
                                       shape_str(shape_));
        return (*data_)[0];
    }

    T at(std::initializer_list<int> idx) const {
        require_shape(static_cast<int>(idx.size()) == rank(), "index rank mismatch");
        int64_t off = 0;
        int d = 0;
        for (int i : idx) {
            require_shape(i >= 0 && i < shape_[d], "index out of bounds");
            off = off * shape_[d] + i;
            ++d;
        }
        return (*data_)[off];
    }

    bool defined() const { return static_cast<bool>(data_); }
    bool tracked() const { return tape_ != nullptr; }
    Tape<T>* tape() const { return tape_; }
    int node() const { return node_; }

    // Same values, no tape participation. Gradients never flow through the
    // detached copy.
    Tensor detach() const {
        Tensor t;
        t.shape_ = shape_;
        t.data_ = data_;
        return t;
    }

    // --- internal wiring, used by op implementations ---

    // Fresh tensor owning zero-initialized (or uninitialized-equivalent)
    // storage; callers fill mutable_values() before sharing it.
    static Tensor alloc(Shape shape) { return Tensor(std::move(shape), nullptr, -1, false); }

    std::vector<T>& mutable_values() { return *mutable_data_; }
    T* mutable_data() { return mutable_data_->data(); }

    void bind(Tape<T>* tape, int node) {
        tape_ = tape;
        node_ = node;
    }

private:
    Tensor(Shape shape, Tape<T>* tape, int node, bool zero_fill)
        : shape_(std::move(shape)), tape_(tape), node_(node) {
        auto buf = std::make_shared<std::vector<T>>();
        if (zero_fill) {
            buf->assign(static_cast<size_t>(numel(shape_)), T(0));
        } else {
            buf->resize(static_cast<size_t>(numel(shape_)));
        }
        mutable_data_ = buf;
        data_ = std::move(buf);
    }

    Shape shape_;
    std::shared_ptr<const std::vector<T>> data_;
    std::shared_ptr<std::vector<T>> mutable_data_;  // only set for alloc()-made tensors
    Tape<T>* tape_ = nullptr;
    int node_ = -1;
};

// Reverse-mode tape. Nodes are appended in forward order, so parents always
// precede consumers; backward() runs the node list once, in reverse.
template <typename T>
class Tape {
public:
    // Backward callback: receives the accumulated output gradient of this
    // node and pushes contributions into parent nodes via accumulate().
    using BackwardFn = std::function<void(Tape&, const std::vector<T>&)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    int add_node(int64_t out_size, BackwardFn backward) {
        require(!frozen_, "tape is frozen after backward; build a new tape");
        nodes_.push_back(Node{out_size, std::move(backward), nullptr});
        grads_.emplace_back();
        return static_cast<int>(nodes_.size()) - 1;
    }

    // Lifts a parameter onto the tape as a leaf. The returned tensor holds a
    // snapshot of the current parameter value; backward() adds the leaf's
    // accumulated gradient into param.grad.
    Tensor<T> watch(Parameter<T>& param) {
        require(!frozen_, "tape is frozen after backward; build a new tape");
        Tensor<T> t = Tensor<T>::alloc(param.shape);
        std::copy(param.value.begin(), param.value.end(), t.mutable_values().begin());
        nodes_.push_back(Node{param.size(), nullptr, &param});
        grads_.emplace_back();
        t.bind(this, static_cast<int>(nodes_.size()) - 1);
        return t;
    }

    void accumulate(int node, const T* g, int64_t n) {
        auto& buf = grads_[static_cast<size_t>(node)];
        if (buf.empty()) buf.assign(static_cast<size_t>(nodes_[node].out_size), T(0));
        for (int64_t i = 0; i < n; ++i) buf[static_cast<size_t>(i)] += g[i];
    }

    void accumulate(int node, const std::vector<T>& g) {
        accumulate(node, g.data(), static_cast<int64_t>(g.size()));
    }

    // Sweep from the loss to the leaves. Nodes whose gradient buffer was
    // never touched are skipped entirely, so subgraphs that do not feed the
    // loss (detached weights, unselected branches) receive no gradient and
    // their parameters keep has_grad == false.
    void backward(const Tensor<T>& loss) {
        require(!frozen_, "backward was already called on this tape");
        require(loss.tracked() && loss.tape() == this, "loss tensor is not on this tape");
        require(loss.size() == 1, "backward requires a scalar loss, got shape " +
                                      shape_str(loss.shape()));
        frozen_ = true;
        grads_[static_cast<size_t>(loss.node())].assign(1, T(1));
        for (int i = loss.node(); i >= 0; --i) {
            auto& g = grads_[static_cast<size_t>(i)];
            if (g.empty()) continue;
            Node& nd = nodes_[static_cast<size_t>(i)];
            if (nd.param) {
                auto& pg = nd.param->grad;
                for (size_t j = 0; j < g.size(); ++j) pg[j] += g[j];
                nd.param->has_grad = true;
            }
            if (nd.backward) nd.backward(*this, g);
            std::vector<T>().swap(g);
        }
    }

    size_t node_count() const { return nodes_.size(); }
    bool frozen() const { return frozen_; }

private:
    struct Node {
        int64_t out_size;
        BackwardFn backward;
        Parameter<T>* param;
    };

    std::vector<Node> nodes_;
    std::vector<std::vector<T>> grads_;
    bool frozen_ = false;
};

namespace detail {

// Common tape of an op's inputs. Mixing tensors from two different live
// tapes is a programming error.
template <typename T>
Tape<T>* merge_tapes(std::initializer_list<const Tensor<T>*> inputs) {
    Tape<T>* tape = nullptr;
    for (const Tensor<T>* t : inputs) {
        if (!t->tracked()) continue;
        if (tape == nullptr) {
            tape = t->tape();
        } else {
            require(tape == t->tape(), "operands belong to different tapes");
        }
    }
    return tape;
}

}  // namespace detail

}  // namespace sodboost
