#include "cpgan/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>

namespace cpgan {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) {
        check(d > 0, "tensor extents must be positive, got %lld", static_cast<long long>(d));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

static std::shared_ptr<detail::TensorNode> make_node(Shape shape, bool requires_grad) {
    auto n = std::make_shared<detail::TensorNode>();
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    Tensor t;
    const int64_t n = shape_numel(shape);
    t.node_ = make_node(std::move(shape), requires_grad);
    t.node_->data.assign(static_cast<size_t>(n), 0.0);
    return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.data().begin(), t.data().end(), value);
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
    const int64_t n = shape_numel(shape);
    check(static_cast<int64_t>(values.size()) == n, "from_data: %lld values for shape %s",
          static_cast<long long>(values.size()), shape_str(shape).c_str());
    Tensor t;
    t.node_ = make_node(std::move(shape), requires_grad);
    t.node_->data = std::move(values);
    return t;
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::rand_uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

Tensor Tensor::rand_normal(Shape shape, Rng& rng, double mean, double stddev, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.data()) v = rng.normal(mean, stddev);
    return t;
}

const Shape& Tensor::shape() const {
    check(node_ != nullptr, "use of undefined tensor");
    return node_->shape;
}

int64_t Tensor::dim(int i) const {
    const Shape& s = shape();
    check(i >= 0 && i < static_cast<int>(s.size()), "dim index %d out of range for %s", i,
          shape_str(s).c_str());
    return s[static_cast<size_t>(i)];
}

int64_t Tensor::size() const { return static_cast<int64_t>(data().size()); }

std::vector<double>& Tensor::data() {
    check(node_ != nullptr, "use of undefined tensor");
    return node_->data;
}

const std::vector<double>& Tensor::data() const {
    check(node_ != nullptr, "use of undefined tensor");
    return node_->data;
}

double Tensor::item() const {
    check(size() == 1, "item() requires a scalar tensor, shape is %s", shape_str(shape()).c_str());
    return data()[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
    check(node_ != nullptr, "use of undefined tensor");
    node_->requires_grad = v;
    return *this;
}

std::vector<double>& Tensor::grad() {
    check(node_ != nullptr, "use of undefined tensor");
    if (node_->grad.size() != node_->data.size()) node_->grad.assign(node_->data.size(), 0.0);
    return node_->grad;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

void Tensor::zero_grad() {
    if (!node_) return;
    node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::detach() const {
    check(node_ != nullptr, "use of undefined tensor");
    return from_data(node_->shape, node_->data, false);
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

static thread_local Tape* t_active_tape = nullptr;
static std::atomic<uint64_t> g_tape_ids{1};

Tape::Tape() : id_(g_tape_ids.fetch_add(1)) {}

Tape::~Tape() = default;

Tape* Tape::active() { return t_active_tape; }

void Tape::record(const std::vector<Tensor>& touched, std::function<void()> backward_fn) {
    check(!consumed_, "tape already consumed by backward(); clear() before re-recording");
    for (const Tensor& t : touched) {
        detail::TensorNode* n = t.node();
        if (!n) continue;
        if (n->registered_in != id_) {
            n->registered_in = id_;
            registered_.push_back(t.node_ptr());
        }
    }
    ops_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
    check(loss.defined(), "backward: undefined loss");
    check(loss.size() == 1, "backward requires a scalar loss, shape is %s",
          shape_str(loss.shape()).c_str());
    check(!consumed_, "backward invoked twice without re-recording");
    consumed_ = true;
    for (auto& n : registered_) n->grad.assign(n->data.size(), 0.0);
    loss.node()->grad.assign(1, 1.0);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

void Tape::clear() {
    for (auto& n : registered_) {
        if (n->producer == this) n->producer = nullptr;
        n->registered_in = 0;
    }
    ops_.clear();
    registered_.clear();
    consumed_ = false;
}

TapeScope::TapeScope(Tape& tape) : prev_(t_active_tape) { t_active_tape = &tape; }

TapeScope::~TapeScope() { t_active_tape = prev_; }

bool needs_grad(const Tensor& t) {
    if (!t.defined()) return false;
    if (t.requires_grad()) return Tape::active() != nullptr;
    return t.node()->producer != nullptr && t.node()->producer == Tape::active();
}

bool grad_needed(std::initializer_list<Tensor> inputs) {
    for (const Tensor& t : inputs) {
        if (needs_grad(t)) return true;
    }
    return false;
}

void record_op(const std::vector<Tensor>& inputs, const std::vector<Tensor>& outputs,
               std::function<void()> backward_fn) {
    Tape* tape = Tape::active();
    check(tape != nullptr, "record_op called without an active tape");
    std::vector<Tensor> touched(inputs.begin(), inputs.end());
    touched.insert(touched.end(), outputs.begin(), outputs.end());
    tape->record(touched, std::move(backward_fn));
    for (const Tensor& t : outputs) {
        if (t.defined()) t.node()->producer = tape;
    }
}

bool needs_grad_buffer(const Tensor& t) {
    return t.defined() && t.node()->grad.size() == t.data().size() && !t.data().empty();
}

}  // namespace cpgan
