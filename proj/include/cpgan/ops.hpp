#pragma once

#include <utility>

#include "cpgan/tensor.hpp"

namespace cpgan {

// Variance stabilizer used by channel statistics (std = sqrt(var + kStatsEps)).
inline constexpr double kStatsEps = 1e-5;

// ---------------------------------------------------------------------------
// Elementwise ops. Binary ops broadcast under trailing-dimension rules
// (shapes aligned at the right; extents must match or be 1).
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
// exp of each element; caller keeps inputs in a sane range.
Tensor exp_op(const Tensor& a);
// Natural log; throws on non-positive input (shift by an epsilon first if
// the domain is not guaranteed).
Tensor log_op(const Tensor& a);
Tensor sqrt_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor softplus(const Tensor& a);
// Clamp to [lo, hi]; gradient is passed through strictly inside the range.
Tensor clamp(const Tensor& a, double lo, double hi);

// ---------------------------------------------------------------------------
// Linear algebra / reductions
// ---------------------------------------------------------------------------

// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Numerically stable softmax along `axis`; outputs sum to 1 along it.
Tensor softmax(const Tensor& x, int axis);

// Per-(sample, channel) spatial statistics of an [N,C,H,W] tensor:
// mean[N,C] and std[N,C] with std = sqrt(var + kStatsEps). Differentiable.
std::pair<Tensor, Tensor> channel_stats(const Tensor& x);

// Spatial average of an [N,C,H,W] tensor -> [N,C].
Tensor spatial_mean(const Tensor& x);

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
// Sums out one axis (result drops that axis).
Tensor sum_axis(const Tensor& x, int axis);

// Mean squared error over all elements.
Tensor mse(const Tensor& a, const Tensor& b);

// Mean over elements of BCE-with-logits against a constant target,
// computed in softplus form for stability.
Tensor bce_with_logits_mean(const Tensor& logits, double target);

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape new_shape);
// Slice [start, start+len) along `axis`.
Tensor slice_axis(const Tensor& x, int axis, int64_t start, int64_t len);
// Concatenate along `axis`; other extents must match.
Tensor concat_axis(const std::vector<Tensor>& parts, int axis);

}  // namespace cpgan
