// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense compute kernels behind the tensor ops. Each kernel has a serial
// reference version (plain loops, used by tests and the benchmark) and the
// default OpenMP/GEMM-backed version. Both produce the same values up to
// float summation order.

#include <cstdint>
#include <span>

namespace stylepoint::kernels {

struct ConvGeometry {
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    std::int64_t in_h = 0;
    std::int64_t in_w = 0;
    std::int64_t kernel = 3;
    std::int64_t stride = 1;
    std::int64_t pad = 1;
    std::int64_t output_pad = 0; // transposed conv only

    std::int64_t conv_out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    std::int64_t conv_out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
    std::int64_t tconv_out_h() const { return (in_h - 1) * stride - 2 * pad + kernel + output_pad; }
    std::int64_t tconv_out_w() const { return (in_w - 1) * stride - 2 * pad + kernel + output_pad; }
};

/// C[M,N] (+)= op(A) * op(B), row-major. op transposes when the flag is set;
/// A is stored [M,K] (or [K,M] when trans_a), B is [K,N] (or [N,K]).
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, const float *a,
          const float *b, float *c, bool accumulate);

// conv2d: x [Cin,H,W], w [Cout,Cin,k,k], bias [Cout] (may be empty) -> y [Cout,Ho,Wo]
void conv2d_forward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> bias, std::span<float> y);
// Gradients; any output span may be empty to skip it. Results accumulate.
void conv2d_backward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                     std::span<const float> gy, std::span<float> gx, std::span<float> gw,
                     std::span<float> gbias);

// transposed conv2d: x [Cin,H,W], w [Cin,Cout,k,k], bias [Cout] -> y [Cout,Ho,Wo]
void conv_transpose2d_forward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                              std::span<const float> bias, std::span<float> y);
void conv_transpose2d_backward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                               std::span<const float> gy, std::span<float> gx, std::span<float> gw,
                               std::span<float> gbias);

namespace reference {

void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, const float *a,
          const float *b, float *c, bool accumulate);
void conv2d_forward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> bias, std::span<float> y);
void conv_transpose2d_forward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                              std::span<const float> bias, std::span<float> y);

} // namespace reference

} // namespace stylepoint::kernels
