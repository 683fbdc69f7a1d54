#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cpgan/util.hpp"

namespace cpgan {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

class Tape;

namespace detail {
struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until backward allocates it
    bool requires_grad = false;
    // Set while the producing tape is alive; gradients only flow through
    // tensors whose producer is the currently active tape (or leaves).
    Tape* producer = nullptr;
    uint64_t registered_in = 0;  // tape id this node was last registered with
};
}  // namespace detail

// Dense N-d double tensor. Value-semantic handle to a shared node; copies
// alias the same storage (autodiff needs stable identities).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value);
    static Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi,
                               bool requires_grad = false);
    static Tensor rand_normal(Shape shape, Rng& rng, double mean, double stddev,
                              bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    int64_t dim(int i) const;
    int64_t size() const;

    std::vector<double>& data();
    const std::vector<double>& data() const;
    double item() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool v);

    // Gradient buffer; allocated zero-filled on first access.
    std::vector<double>& grad();
    bool has_grad() const;
    void zero_grad();

    // Same values, fresh node, no grad flow.
    Tensor detach() const;

    detail::TensorNode* node() const { return node_.get(); }
    std::shared_ptr<detail::TensorNode> node_ptr() const { return node_; }

private:
    std::shared_ptr<detail::TensorNode> node_;
};

// Reverse-mode tape. Ops append backward closures in recording order;
// backward() replays them in exact reverse order. Single-threaded by
// contract: a tape and its tensors form one logical unit.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers the touched tensors (inputs and outputs) and the backward
    // rule for one recorded operation.
    void record(const std::vector<Tensor>& touched, std::function<void()> backward_fn);

    // Populates grad buffers of every registered tensor with d(loss)/d(t).
    // loss must be scalar; throws if called twice without clear().
    void backward(const Tensor& loss);

    void clear();
    size_t num_ops() const { return ops_.size(); }

    // Innermost active tape on this thread (nullptr when not recording).
    static Tape* active();

    uint64_t id() const { return id_; }

private:
    friend class TapeScope;
    std::vector<std::function<void()>> ops_;
    std::vector<std::shared_ptr<detail::TensorNode>> registered_;
    bool consumed_ = false;
    uint64_t id_;
};

// RAII guard making a tape the active recording target.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

// True when gradients must flow through t on the active tape: t is a
// grad-requiring leaf or was produced by an op recorded on that tape.
bool needs_grad(const Tensor& t);
bool grad_needed(std::initializer_list<Tensor> inputs);

// Records one op on the active tape: registers inputs and outputs for
// gradient allocation, marks outputs as tape-produced, and appends the
// backward rule.
void record_op(const std::vector<Tensor>& inputs, const std::vector<Tensor>& outputs,
               std::function<void()> backward_fn);

// True during a backward replay for tensors whose gradient buffer was
// allocated by the tape (i.e. gradients should be accumulated into them).
bool needs_grad_buffer(const Tensor& t);

}  // namespace cpgan
