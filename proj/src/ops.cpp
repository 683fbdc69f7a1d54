#include "cpgan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace cpgan {

namespace {

// Broadcast layout of one operand against the result shape. Three fast
// layouts cover everything this codebase does; the odometer path handles
// the rest.
struct BcastView {
    enum Kind { Same, LeadingRun, TrailingRun, General } kind = Same;
    int64_t block = 1;    // LeadingRun: flat index = out_flat / block
    int64_t suffix = 1;   // TrailingRun: flat index = out_flat % suffix
    std::vector<int64_t> strides;  // General: per-out-dim strides (0 = broadcast)
};

Shape broadcast_shape(const Shape& a, const Shape& b, const char* who) {
    const size_t ra = a.size(), rb = b.size();
    const size_t r = std::max(ra, rb);
    Shape out(r, 1);
    for (size_t i = 0; i < r; ++i) {
        const int64_t da = i < ra ? a[ra - 1 - i] : 1;
        const int64_t db = i < rb ? b[rb - 1 - i] : 1;
        check(da == db || da == 1 || db == 1, "%s: shapes %s and %s are not broadcastable", who,
              shape_str(a).c_str(), shape_str(b).c_str());
        out[r - 1 - i] = std::max(da, db);
    }
    return out;
}

BcastView make_view(const Shape& in, const Shape& out) {
    BcastView v;
    if (in == out) {
        v.kind = BcastView::Same;
        return v;
    }
    const size_t r = out.size();
    // Right-align input dims against out.
    std::vector<int64_t> dims(r, 1);
    for (size_t i = 0; i < in.size(); ++i) dims[r - in.size() + i] = in[i];
    // Strides of the (aligned) input over out's index space.
    std::vector<int64_t> strides(r, 0);
    int64_t s = 1;
    for (size_t i = r; i-- > 0;) {
        strides[i] = dims[i] == 1 ? 0 : s;
        if (dims[i] != 1) s *= dims[i];
    }
    // Leading run: all non-1 dims first, then all 1s -> index = flat / block.
    size_t first_one = 0;
    while (first_one < r && dims[first_one] != 1) ++first_one;
    bool leading = true;
    for (size_t i = first_one; i < r; ++i) leading = leading && dims[i] == 1;
    bool head_matches = true;
    for (size_t i = 0; i < first_one; ++i) head_matches = head_matches && dims[i] == out[i];
    if (leading && head_matches) {
        v.kind = BcastView::LeadingRun;
        v.block = 1;
        for (size_t i = first_one; i < r; ++i) v.block *= out[i];
        return v;
    }
    // Trailing run: all 1s first, then non-1 dims matching out -> flat % suffix.
    size_t first_non1 = 0;
    while (first_non1 < r && dims[first_non1] == 1) ++first_non1;
    bool tail_matches = true;
    for (size_t i = first_non1; i < r; ++i) tail_matches = tail_matches && dims[i] == out[i];
    if (tail_matches) {
        v.kind = BcastView::TrailingRun;
        v.suffix = 1;
        for (size_t i = first_non1; i < r; ++i) v.suffix *= out[i];
        return v;
    }
    v.kind = BcastView::General;
    v.strides = std::move(strides);
    return v;
}

inline int64_t view_index(const BcastView& v, int64_t flat, const std::vector<int64_t>& coords) {
    switch (v.kind) {
        case BcastView::Same: return flat;
        case BcastView::LeadingRun: return flat / v.block;
        case BcastView::TrailingRun: return flat % v.suffix;
        case BcastView::General: {
            int64_t idx = 0;
            for (size_t i = 0; i < coords.size(); ++i) idx += coords[i] * v.strides[i];
            return idx;
        }
    }
    return 0;
}

// Iterates the output index space, providing flat output index and the two
// operand indices. Single-threaded and deterministic.
template <typename F>
void for_broadcast(const Shape& out, const BcastView& va, const BcastView& vb, F&& f) {
    const int64_t n = shape_numel(out);
    if (va.kind != BcastView::General && vb.kind != BcastView::General) {
        static const std::vector<int64_t> empty;
        for (int64_t i = 0; i < n; ++i) f(i, view_index(va, i, empty), view_index(vb, i, empty));
        return;
    }
    std::vector<int64_t> coords(out.size(), 0);
    for (int64_t i = 0; i < n; ++i) {
        f(i, view_index(va, i, coords), view_index(vb, i, coords));
        for (size_t d = out.size(); d-- > 0;) {
            if (++coords[d] < out[d]) break;
            coords[d] = 0;
        }
    }
}

enum class BinKind { Add, Sub, Mul, Div };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind, const char* name) {
    const Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
    const BcastView va = make_view(a.shape(), out_shape);
    const BcastView vb = make_view(b.shape(), out_shape);
    Tensor out = Tensor::zeros(out_shape);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    switch (kind) {
        case BinKind::Add:
            for_broadcast(out_shape, va, vb, [&](int64_t o, int64_t i, int64_t j) { po[o] = pa[i] + pb[j]; });
            break;
        case BinKind::Sub:
            for_broadcast(out_shape, va, vb, [&](int64_t o, int64_t i, int64_t j) { po[o] = pa[i] - pb[j]; });
            break;
        case BinKind::Mul:
            for_broadcast(out_shape, va, vb, [&](int64_t o, int64_t i, int64_t j) { po[o] = pa[i] * pb[j]; });
            break;
        case BinKind::Div:
            for_broadcast(out_shape, va, vb, [&](int64_t o, int64_t i, int64_t j) { po[o] = pa[i] / pb[j]; });
            break;
    }
    if (grad_needed({a, b})) {
        record_op({a, b}, {out}, [a, b, out, va, vb, kind, out_shape]() {
            const double* g = out.node()->grad.data();
            const double* pa2 = a.data().data();
            const double* pb2 = b.data().data();
            const bool na = needs_grad_buffer(a);
            const bool nb = needs_grad_buffer(b);
            double* ga = na ? a.node()->grad.data() : nullptr;
            double* gb = nb ? b.node()->grad.data() : nullptr;
            for_broadcast(out_shape, va, vb, [&](int64_t o, int64_t i, int64_t j) {
                const double gv = g[o];
                switch (kind) {
                    case BinKind::Add:
                        if (ga) ga[i] += gv;
                        if (gb) gb[j] += gv;
                        break;
                    case BinKind::Sub:
                        if (ga) ga[i] += gv;
                        if (gb) gb[j] -= gv;
                        break;
                    case BinKind::Mul:
                        if (ga) ga[i] += gv * pb2[j];
                        if (gb) gb[j] += gv * pa2[i];
                        break;
                    case BinKind::Div:
                        if (ga) ga[i] += gv / pb2[j];
                        if (gb) gb[j] -= gv * pa2[i] / (pb2[j] * pb2[j]);
                        break;
                }
            });
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Div, "div"); }

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd dfn) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data().data();
    double* po = out.data().data();
    const int64_t n = a.size();
    for (int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i]);
    if (grad_needed({a})) {
        record_op({a}, {out}, [a, out, dfn]() {
            if (!needs_grad_buffer(a)) return;
            const double* g = out.node()->grad.data();
            const double* x = a.data().data();
            const double* y = out.data().data();
            double* ga = a.node()->grad.data();
            const int64_t m = a.size();
            for (int64_t i = 0; i < m; ++i) ga[i] += g[i] * dfn(x[i], y[i]);
        });
    }
    return out;
}

inline double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double stable_softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

}  // namespace

Tensor scale(const Tensor& a, double s) {
    return unary_op(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary_op(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
    return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    return unary_op(a, [slope](double x) { return x > 0.0 ? x : slope * x; },
                    [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor exp_op(const Tensor& a) {
    return unary_op(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log_op(const Tensor& a) {
    for (double v : a.data()) check(v > 0.0, "log: non-positive input %g", v);
    return unary_op(a, [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Tensor sqrt_op(const Tensor& a) {
    for (double v : a.data()) check(v >= 0.0, "sqrt: negative input %g", v);
    return unary_op(a, [](double x) { return std::sqrt(x); },
                    [](double, double y) { return 0.5 / y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(a, [](double x) { return stable_sigmoid(x); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_op(const Tensor& a) {
    return unary_op(a, [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& a) {
    return unary_op(a, [](double x) { return stable_softplus(x); },
                    [](double x, double) { return stable_sigmoid(x); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    check(lo <= hi, "clamp: lo %g > hi %g", lo, hi);
    return unary_op(a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
                    [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.rank() == 2 && b.rank() == 2, "matmul expects rank-2 tensors, got %s x %s",
          shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str());
    const int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    check(k == k2, "matmul: inner dimensions differ (%s x %s)", shape_str(a.shape()).c_str(),
          shape_str(b.shape()).c_str());
    Tensor out = Tensor::zeros({m, n});
    gemm(false, false, m, n, k, 1.0, a.data().data(), k, b.data().data(), n, 0.0,
         out.data().data(), n);
    if (grad_needed({a, b})) {
        record_op({a, b}, {out}, [a, b, out, m, n, k]() {
            const double* g = out.node()->grad.data();
            if (needs_grad_buffer(a)) {
                gemm(false, true, m, k, n, 1.0, g, n, b.data().data(), n, 1.0,
                     a.node()->grad.data(), k);
            }
            if (needs_grad_buffer(b)) {
                gemm(true, false, k, n, m, 1.0, a.data().data(), k, g, n, 1.0,
                     b.node()->grad.data(), n);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

namespace {
// Decomposes shape as [outer, axis_len, inner].
void axis_split(const Shape& s, int axis, int64_t* outer, int64_t* len, int64_t* inner) {
    check(axis >= 0 && axis < static_cast<int>(s.size()), "axis %d invalid for shape %s", axis,
          shape_str(s).c_str());
    *outer = 1;
    *inner = 1;
    for (int i = 0; i < axis; ++i) *outer *= s[static_cast<size_t>(i)];
    *len = s[static_cast<size_t>(axis)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) *inner *= s[i];
}
}  // namespace

Tensor softmax(const Tensor& x, int axis) {
    int64_t outer, len, inner;
    axis_split(x.shape(), axis, &outer, &len, &inner);
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data().data();
    double* po = out.data().data();
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * len * inner + in;
            double mx = px[base];
            for (int64_t l = 1; l < len; ++l) mx = std::max(mx, px[base + l * inner]);
            double sum = 0.0;
            for (int64_t l = 0; l < len; ++l) {
                const double e = std::exp(px[base + l * inner] - mx);
                po[base + l * inner] = e;
                sum += e;
            }
            const double inv = 1.0 / sum;
            for (int64_t l = 0; l < len; ++l) po[base + l * inner] *= inv;
        }
    }
    if (grad_needed({x})) {
        record_op({x}, {out}, [x, out, outer, len, inner]() {
            if (!needs_grad_buffer(x)) return;
            const double* g = out.node()->grad.data();
            const double* y = out.data().data();
            double* gx = x.node()->grad.data();
            for (int64_t o = 0; o < outer; ++o) {
                for (int64_t in = 0; in < inner; ++in) {
                    const int64_t base = o * len * inner + in;
                    double dot = 0.0;
                    for (int64_t l = 0; l < len; ++l) {
                        const int64_t idx = base + l * inner;
                        dot += g[idx] * y[idx];
                    }
                    for (int64_t l = 0; l < len; ++l) {
                        const int64_t idx = base + l * inner;
                        gx[idx] += y[idx] * (g[idx] - dot);
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// channel statistics
// ---------------------------------------------------------------------------

std::pair<Tensor, Tensor> channel_stats(const Tensor& x) {
    check(x.rank() == 4, "channel_stats expects [N,C,H,W], got %s", shape_str(x.shape()).c_str());
    const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor mean = Tensor::zeros({n, c});
    Tensor stddev = Tensor::zeros({n, c});
    const double* px = x.data().data();
    double* pm = mean.data().data();
    double* ps = stddev.data().data();
    for (int64_t i = 0; i < n * c; ++i) {
        const double* lane = px + i * hw;
        double s = 0.0;
        for (int64_t p = 0; p < hw; ++p) s += lane[p];
        const double m = s / static_cast<double>(hw);
        double v = 0.0;
        for (int64_t p = 0; p < hw; ++p) {
            const double d = lane[p] - m;
            v += d * d;
        }
        pm[i] = m;
        ps[i] = std::sqrt(v / static_cast<double>(hw) + kStatsEps);
    }
    if (grad_needed({x})) {
        record_op({x}, {mean, stddev}, [x, mean, stddev, n, c, hw]() {
            if (!needs_grad_buffer(x)) return;
            const double* gm = mean.node()->grad.data();
            const double* gs = stddev.node()->grad.data();
            const double* px2 = x.data().data();
            const double* pm2 = mean.data().data();
            const double* ps2 = stddev.data().data();
            double* gx = x.node()->grad.data();
            const double inv_hw = 1.0 / static_cast<double>(hw);
            for (int64_t i = 0; i < n * c; ++i) {
                const double dm = gm[i] * inv_hw;
                const double ds = gs[i] * inv_hw / ps2[i];
                const double m = pm2[i];
                const double* lane = px2 + i * hw;
                double* glane = gx + i * hw;
                for (int64_t p = 0; p < hw; ++p) glane[p] += dm + ds * (lane[p] - m);
            }
        });
    }
    return {mean, stddev};
}

Tensor spatial_mean(const Tensor& x) {
    check(x.rank() == 4, "spatial_mean expects [N,C,H,W], got %s", shape_str(x.shape()).c_str());
    const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor out = Tensor::zeros({n, c});
    const double* px = x.data().data();
    double* po = out.data().data();
    for (int64_t i = 0; i < n * c; ++i) {
        double s = 0.0;
        const double* lane = px + i * hw;
        for (int64_t p = 0; p < hw; ++p) s += lane[p];
        po[i] = s / static_cast<double>(hw);
    }
    if (grad_needed({x})) {
        record_op({x}, {out}, [x, out, n, c, hw]() {
            if (!needs_grad_buffer(x)) return;
            const double* g = out.node()->grad.data();
            double* gx = x.node()->grad.data();
            const double inv = 1.0 / static_cast<double>(hw);
            for (int64_t i = 0; i < n * c; ++i) {
                const double gv = g[i] * inv;
                double* glane = gx + i * hw;
                for (int64_t p = 0; p < hw; ++p) glane[p] += gv;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor out = Tensor::scalar(s);
    if (grad_needed({x})) {
        record_op({x}, {out}, [x, out]() {
            if (!needs_grad_buffer(x)) return;
            const double g = out.node()->grad[0];
            for (auto& gv : x.node()->grad) gv += g;
        });
    }
    return out;
}

Tensor mean_all(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor out = Tensor::scalar(s * inv);
    if (grad_needed({x})) {
        record_op({x}, {out}, [x, out, inv]() {
            if (!needs_grad_buffer(x)) return;
            const double g = out.node()->grad[0] * inv;
            for (auto& gv : x.node()->grad) gv += g;
        });
    }
    return out;
}

Tensor sum_axis(const Tensor& x, int axis) {
    int64_t outer, len, inner;
    axis_split(x.shape(), axis, &outer, &len, &inner);
    Shape out_shape;
    for (int i = 0; i < x.rank(); ++i) {
        if (i != axis) out_shape.push_back(x.dim(i));
    }
    if (out_shape.empty()) out_shape = {1};
    Tensor out = Tensor::zeros(out_shape);
    const double* px = x.data().data();
    double* po = out.data().data();
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            double s = 0.0;
            for (int64_t l = 0; l < len; ++l) s += px[(o * len + l) * inner + in];
            po[o * inner + in] = s;
        }
    }
    if (grad_needed({x})) {
        record_op({x}, {out}, [x, out, outer, len, inner]() {
            if (!needs_grad_buffer(x)) return;
            const double* g = out.node()->grad.data();
            double* gx = x.node()->grad.data();
            for (int64_t o = 0; o < outer; ++o) {
                for (int64_t in = 0; in < inner; ++in) {
                    const double gv = g[o * inner + in];
                    for (int64_t l = 0; l < len; ++l) gx[(o * len + l) * inner + in] += gv;
                }
            }
        });
    }
    return out;
}

Tensor mse(const Tensor& a, const Tensor& b) {
    check(same_shape(a.shape(), b.shape()), "mse: shape mismatch %s vs %s",
          shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str());
    const int64_t n = a.size();
    const double inv = 1.0 / static_cast<double>(n);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = pa[i] - pb[i];
        s += d * d;
    }
    Tensor out = Tensor::scalar(s * inv);
    if (grad_needed({a, b})) {
        record_op({a, b}, {out}, [a, b, out, n, inv]() {
            const double g = out.node()->grad[0] * 2.0 * inv;
            const double* pa2 = a.data().data();
            const double* pb2 = b.data().data();
            double* ga = needs_grad_buffer(a) ? a.node()->grad.data() : nullptr;
            double* gb = needs_grad_buffer(b) ? b.node()->grad.data() : nullptr;
            for (int64_t i = 0; i < n; ++i) {
                const double d = g * (pa2[i] - pb2[i]);
                if (ga) ga[i] += d;
                if (gb) gb[i] -= d;
            }
        });
    }
    return out;
}

Tensor bce_with_logits_mean(const Tensor& logits, double target) {
    const int64_t n = logits.size();
    const double inv = 1.0 / static_cast<double>(n);
    const double* px = logits.data().data();
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += stable_softplus(px[i]) - target * px[i];
    Tensor out = Tensor::scalar(s * inv);
    if (grad_needed({logits})) {
        record_op({logits}, {out}, [logits, out, target, n, inv]() {
            if (!needs_grad_buffer(logits)) return;
            const double g = out.node()->grad[0] * inv;
            const double* px2 = logits.data().data();
            double* gx = logits.node()->grad.data();
            for (int64_t i = 0; i < n; ++i) gx[i] += g * (stable_sigmoid(px2[i]) - target);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape new_shape) {
    check(shape_numel(new_shape) == x.size(), "reshape: %s has %lld elements, target %s needs %lld",
          shape_str(x.shape()).c_str(), static_cast<long long>(x.size()),
          shape_str(new_shape).c_str(), static_cast<long long>(shape_numel(new_shape)));
    Tensor out = Tensor::from_data(std::move(new_shape), x.data());
    if (grad_needed({x})) {
        record_op({x}, {out}, [x, out]() {
            if (!needs_grad_buffer(x)) return;
            const double* g = out.node()->grad.data();
            double* gx = x.node()->grad.data();
            const int64_t n = x.size();
            for (int64_t i = 0; i < n; ++i) gx[i] += g[i];
        });
    }
    return out;
}

Tensor slice_axis(const Tensor& x, int axis, int64_t start, int64_t len) {
    int64_t outer, alen, inner;
    axis_split(x.shape(), axis, &outer, &alen, &inner);
    check(start >= 0 && len >= 1 && start + len <= alen, "slice [%lld,%lld) out of range for %s",
          static_cast<long long>(start), static_cast<long long>(start + len),
          shape_str(x.shape()).c_str());
    Shape out_shape = x.shape();
    out_shape[static_cast<size_t>(axis)] = len;
    Tensor out = Tensor::zeros(out_shape);
    const double* px = x.data().data();
    double* po = out.data().data();
    for (int64_t o = 0; o < outer; ++o) {
        std::memcpy(po + o * len * inner, px + (o * alen + start) * inner,
                    static_cast<size_t>(len * inner) * sizeof(double));
    }
    if (grad_needed({x})) {
        record_op({x}, {out}, [x, out, outer, alen, inner, start, len]() {
            if (!needs_grad_buffer(x)) return;
            const double* g = out.node()->grad.data();
            double* gx = x.node()->grad.data();
            for (int64_t o = 0; o < outer; ++o) {
                for (int64_t i = 0; i < len * inner; ++i) {
                    gx[(o * alen + start) * inner + i] += g[o * len * inner + i];
                }
            }
        });
    }
    return out;
}

Tensor concat_axis(const std::vector<Tensor>& parts, int axis) {
    check(!parts.empty(), "concat of zero tensors");
    const Shape& s0 = parts[0].shape();
    int64_t total = 0;
    for (const Tensor& p : parts) {
        check(p.rank() == static_cast<int>(s0.size()), "concat: rank mismatch");
        for (int i = 0; i < p.rank(); ++i) {
            check(i == axis || p.dim(i) == s0[static_cast<size_t>(i)],
                  "concat: extent mismatch on dim %d", i);
        }
        total += p.dim(axis);
    }
    Shape out_shape = s0;
    out_shape[static_cast<size_t>(axis)] = total;
    Tensor out = Tensor::zeros(out_shape);
    int64_t outer, tlen, inner;
    axis_split(out_shape, axis, &outer, &tlen, &inner);
    double* po = out.data().data();
    int64_t offset = 0;
    bool any_grad = false;
    for (const Tensor& p : parts) {
        const int64_t plen = p.dim(axis);
        const double* pp = p.data().data();
        for (int64_t o = 0; o < outer; ++o) {
            std::memcpy(po + (o * tlen + offset) * inner, pp + o * plen * inner,
                        static_cast<size_t>(plen * inner) * sizeof(double));
        }
        offset += plen;
        any_grad = any_grad || needs_grad(p);
    }
    if (any_grad) {
        std::vector<Tensor> inputs = parts;
        record_op(inputs, {out}, [inputs, out, outer, tlen, inner]() {
            const double* g = out.node()->grad.data();
            int64_t off = 0;
            for (const Tensor& p : inputs) {
                const int64_t plen = static_cast<int64_t>(p.data().size()) / (outer * inner);
                if (needs_grad_buffer(p)) {
                    double* gp = p.node()->grad.data();
                    for (int64_t o = 0; o < outer; ++o) {
                        for (int64_t i = 0; i < plen * inner; ++i) {
                            gp[o * plen * inner + i] += g[(o * tlen + off) * inner + i];
                        }
                    }
                }
                off += plen;
            }
        });
    }
    return out;
}

}  // namespace cpgan
