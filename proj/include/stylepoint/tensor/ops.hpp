// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/kernels/sparse.hpp"
#include "stylepoint/tensor/tensor.hpp"

#include <cstdint>
#include <vector>

// Differentiable tensor ops. Every op computes its value eagerly and, when a
// Tape is active and an input requires a gradient, records its backward rule.
namespace stylepoint::ops {

// Linear algebra and broadcasting arithmetic.
Tensor matmul(const Tensor &a, const Tensor &b); // [M,K] x [K,N]
Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &x, float s);
Tensor add_scalar(const Tensor &x, float s);

// Pointwise.
Tensor relu(const Tensor &x);
Tensor leaky_relu(const Tensor &x, float slope);
Tensor sigmoid(const Tensor &x);
Tensor exp(const Tensor &x);
Tensor log(const Tensor &x);
/// Square root; the derivative at exactly 0 is taken as 0.
Tensor sqrt(const Tensor &x);
Tensor clamp_min(const Tensor &x, float lo);
Tensor abs(const Tensor &x);
Tensor square(const Tensor &x);

// Axis reductions. Negative axes count from the back.
Tensor softmax(const Tensor &x, std::int64_t axis);

struct MaxResult {
    Tensor values;
    std::vector<std::int64_t> argmax; // lowest index wins ties
};
MaxResult max_reduce(const Tensor &x, std::int64_t axis);

Tensor sum(const Tensor &x, std::int64_t axis, bool keepdim = false);
Tensor mean(const Tensor &x, std::int64_t axis, bool keepdim = false);
/// Population variance (divides by the axis extent).
Tensor var(const Tensor &x, std::int64_t axis, bool keepdim = false);
Tensor sum_all(const Tensor &x);
Tensor mean_all(const Tensor &x);

// Convolutions over single images laid out [C,H,W].
Tensor conv2d(const Tensor &x, const Tensor &weight, const Tensor &bias, std::int64_t stride, std::int64_t pad);
/// weight is [Cin,Cout,k,k].
Tensor conv_transpose2d(const Tensor &x, const Tensor &weight, const Tensor &bias, std::int64_t stride,
                        std::int64_t pad, std::int64_t output_pad);

// Normalization over the rows of an [N,C] block.
struct BatchNormState {
    Tensor running_mean; // [C]
    Tensor running_var;  // [C]
    float momentum = 0.1f;
    float eps = 1e-5f;
};
/// Training mode normalizes with batch statistics and updates the running
/// estimates; inference mode uses the running estimates.
Tensor batch_norm(const Tensor &x, const Tensor &gamma, const Tensor &beta, BatchNormState &state, bool training);

/// Standardizes `x` along `axis` (zero mean, unit variance, eps inside the
/// root). A single-element axis standardizes to zeros.
Tensor instance_norm(const Tensor &x, std::int64_t axis, float eps = 1e-5f);

// Shape manipulation and indexing.
Tensor concat(const std::vector<Tensor> &parts, std::int64_t axis);
Tensor reshape(const Tensor &x, Shape shape);
Tensor transpose(const Tensor &x); // 2-D only
/// Rows of x selected by `index` (axis 0).
Tensor gather(const Tensor &x, const std::vector<std::int64_t> &index);
/// out[index[m]] += x[m]; `rows` is the output extent along axis 0.
Tensor scatter_add(const Tensor &x, const std::vector<std::int64_t> &index, std::int64_t rows);

/// Fixed sparse linear mixing of items; see kernels::sparse_mix. `out_shape`
/// must hold map.rows * channels values. Backward applies the transposed map.
Tensor sparse_mix(const Tensor &x, const kernels::SparseMap &map, std::int64_t channels, kernels::Layout in_layout,
                  kernels::Layout out_layout, Shape out_shape);

/// Per query q: max over neighbors j of (src[j] - center[q]), channel-wise.
/// Neighbors of q are neighbors[offsets[q] .. offsets[q+1]); an empty list
/// yields zeros. The gradient goes to the first maximizing neighbor.
Tensor max_relative(const Tensor &src, const Tensor &center, const std::vector<std::int64_t> &offsets,
                    const std::vector<std::int64_t> &neighbors);

} // namespace stylepoint::ops

namespace stylepoint {
inline Tensor operator+(const Tensor &a, const Tensor &b) { return ops::add(a, b); }
inline Tensor operator-(const Tensor &a, const Tensor &b) { return ops::sub(a, b); }
inline Tensor operator*(const Tensor &a, const Tensor &b) { return ops::mul(a, b); }
} // namespace stylepoint
