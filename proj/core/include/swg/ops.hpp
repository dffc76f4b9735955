#pragma once

#include <vector>

#include "swg/autodiff.hpp"
#include "swg/rng.hpp"

namespace swg {

// Elementwise binary ops with numpy-style broadcasting (shapes aligned on the
// trailing axes; an extent of 1 broadcasts). Gradients are reduced back over
// the broadcast axes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var add_scalar(const Var& a, double c);
Var mul_scalar(const Var& a, double c);
inline Var neg(const Var& a) { return mul_scalar(a, -1.0); }

// Elementwise unary.
Var gelu(const Var& x);     // exact erf form: 0.5*x*(1+erf(x/sqrt(2)))
Var swish(const Var& x);    // x*sigmoid(x)
Var tanh_op(const Var& x);
Var sigmoid_op(const Var& x);
Var sqrt_op(const Var& x);
Var square(const Var& x);

enum class Activation { gelu, swish, tanh, sigmoid };
Var activation(const Var& x, Activation kind);

// 2D matrix product [m x p]*[p x q] -> [m x q].
Var matmul(const Var& a, const Var& b);
// x [n x d] * W [d x q] + row-broadcast bias [q].
Var linear(const Var& x, const Var& w, const Var& b);

// Cross-correlation. x [B x Cin x H x W], kernel [Cout x Cin x kh x kw].
// Output extent (H + 2*pad - kh)/stride + 1 must be integral.
Var conv2d(const Var& x, const Var& kernel, size_t stride_h = 1, size_t stride_w = 1,
           size_t pad_h = 0, size_t pad_w = 0);

// Per-window maximum over non-overlapping (ph, pw) windows; window extents
// must divide H and W. Gradient routes to the first-occurrence argmax.
Var max_pool2d(const Var& x, size_t ph, size_t pw);

// Stable softmax along one axis; rows sum to 1.
Var softmax(const Var& x, size_t axis);

// Inverted dropout: zero with probability rate, scale survivors by
// 1/(1-rate); identity in eval mode.
Var dropout(const Var& x, double rate, bool training, Rng& rng);

// Reductions.
Var sum_all(const Var& x);                                // -> [1]
Var mean_all(const Var& x);                               // -> [1]
Var sum_axes(const Var& x, std::vector<size_t> axes, bool keepdim);
Var mean_axes(const Var& x, std::vector<size_t> axes, bool keepdim);
Var reduce_max(const Var& x, size_t axis);                // axis removed; ties -> first

// Shape ops (value copies; gradients route back exactly).
Var reshape(const Var& x, std::vector<size_t> new_shape);
Var permute(const Var& x, std::vector<size_t> perm);
inline Var transpose(const Var& x) { return permute(x, {1, 0}); }
Var concat(const std::vector<Var>& parts, size_t axis);
Var slice(const Var& x, size_t axis, size_t start, size_t len);
// Select rows along axis 0; indices may repeat (backward scatter-adds).
Var index_select0(const Var& x, std::vector<size_t> indices);

// Mean squared error over all elements -> [1].
Var mse(const Var& pred, const Var& target);

// Normalization layers as compositions would cost extra graph nodes in the
// hot path, so these are primitives with hand-derived backward passes.
//
// Layer norm over the trailing `norm_rank` axes, eps added to variance.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, size_t norm_rank = 1,
               double eps = 1e-5);

struct BatchNormStats {
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
    double eps = 1e-5;
};

// Batch norm over all axes except `channel_axis`. In training mode uses batch
// statistics and updates `stats` in place; in eval mode uses running stats.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, size_t channel_axis,
               BatchNormStats& stats, bool training);

}  // namespace swg
