// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/kernels/dense.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <vector>

namespace stylepoint::kernels {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

struct PatchLayout {
    std::int64_t channels;
    std::int64_t in_h, in_w;
    std::int64_t out_h, out_w;
    std::int64_t kernel, stride, pad;
};

// cols[(c*k + ky)*k + kx][oy*out_w + ox] = x[c][oy*s - p + ky][ox*s - p + kx]
void im2col(const PatchLayout &l, const float *x, float *cols) {
    const std::int64_t kk = l.kernel * l.kernel;
    const std::int64_t plane = l.out_h * l.out_w;
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < l.channels; ++c) {
        const float *xc = x + c * l.in_h * l.in_w;
        for (std::int64_t ky = 0; ky < l.kernel; ++ky) {
            for (std::int64_t kx = 0; kx < l.kernel; ++kx) {
                float *row = cols + (c * kk + ky * l.kernel + kx) * plane;
                for (std::int64_t oy = 0; oy < l.out_h; ++oy) {
                    const std::int64_t iy = oy * l.stride - l.pad + ky;
                    float *dst = row + oy * l.out_w;
                    if (iy < 0 || iy >= l.in_h) {
                        std::fill(dst, dst + l.out_w, 0.0f);
                        continue;
                    }
                    const float *src = xc + iy * l.in_w;
                    for (std::int64_t ox = 0; ox < l.out_w; ++ox) {
                        const std::int64_t ix = ox * l.stride - l.pad + kx;
                        dst[ox] = (ix >= 0 && ix < l.in_w) ? src[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates patch columns back into x.
void col2im(const PatchLayout &l, const float *cols, float *x) {
    const std::int64_t kk = l.kernel * l.kernel;
    const std::int64_t plane = l.out_h * l.out_w;
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < l.channels; ++c) {
        float *xc = x + c * l.in_h * l.in_w;
        for (std::int64_t ky = 0; ky < l.kernel; ++ky) {
            for (std::int64_t kx = 0; kx < l.kernel; ++kx) {
                const float *row = cols + (c * kk + ky * l.kernel + kx) * plane;
                for (std::int64_t oy = 0; oy < l.out_h; ++oy) {
                    const std::int64_t iy = oy * l.stride - l.pad + ky;
                    if (iy < 0 || iy >= l.in_h) {
                        continue;
                    }
                    const float *src = row + oy * l.out_w;
                    float *dst = xc + iy * l.in_w;
                    for (std::int64_t ox = 0; ox < l.out_w; ++ox) {
                        const std::int64_t ix = ox * l.stride - l.pad + kx;
                        if (ix >= 0 && ix < l.in_w) {
                            dst[ix] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

void add_bias(std::span<const float> bias, std::int64_t channels, std::int64_t plane, float *y) {
    if (bias.empty()) {
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < channels; ++c) {
        float *yc = y + c * plane;
        const float b = bias[static_cast<std::size_t>(c)];
        for (std::int64_t i = 0; i < plane; ++i) {
            yc[i] += b;
        }
    }
}

void reduce_bias(std::span<const float> gy, std::int64_t channels, std::int64_t plane, std::span<float> gbias) {
    if (gbias.empty()) {
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        const float *g = gy.data() + c * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            acc += g[i];
        }
        gbias[static_cast<std::size_t>(c)] += static_cast<float>(acc);
    }
}

PatchLayout conv_layout(const ConvGeometry &g) {
    return {g.in_channels, g.in_h, g.in_w, g.conv_out_h(), g.conv_out_w(), g.kernel, g.stride, g.pad};
}

// The transposed conv is the adjoint of a conv whose input is the
// transposed conv's output.
PatchLayout tconv_layout(const ConvGeometry &g) {
    return {g.out_channels, g.tconv_out_h(), g.tconv_out_w(), g.in_h, g.in_w, g.kernel, g.stride, g.pad};
}

} // namespace

void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, const float *a,
          const float *b, float *c, bool accumulate) {
    MutMap cm(c, m, n);
    if (!accumulate) {
        cm.setZero();
    }
    if (m == 0 || n == 0 || k == 0) {
        return;
    }
    if (!trans_a && !trans_b) {
        cm.noalias() += ConstMap(a, m, k) * ConstMap(b, k, n);
    } else if (trans_a && !trans_b) {
        cm.noalias() += ConstMap(a, k, m).transpose() * ConstMap(b, k, n);
    } else if (!trans_a && trans_b) {
        cm.noalias() += ConstMap(a, m, k) * ConstMap(b, n, k).transpose();
    } else {
        cm.noalias() += ConstMap(a, k, m).transpose() * ConstMap(b, n, k).transpose();
    }
}

void conv2d_forward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> bias, std::span<float> y) {
    const auto l = conv_layout(g);
    const std::int64_t rows = g.in_channels * g.kernel * g.kernel;
    const std::int64_t plane = l.out_h * l.out_w;
    std::vector<float> cols(static_cast<std::size_t>(rows * plane));
    im2col(l, x.data(), cols.data());
    gemm(false, false, g.out_channels, plane, rows, w.data(), cols.data(), y.data(), false);
    add_bias(bias, g.out_channels, plane, y.data());
}

void conv2d_backward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                     std::span<const float> gy, std::span<float> gx, std::span<float> gw, std::span<float> gbias) {
    const auto l = conv_layout(g);
    const std::int64_t rows = g.in_channels * g.kernel * g.kernel;
    const std::int64_t plane = l.out_h * l.out_w;
    std::vector<float> cols(static_cast<std::size_t>(rows * plane));
    if (!gw.empty()) {
        im2col(l, x.data(), cols.data());
        gemm(false, true, g.out_channels, rows, plane, gy.data(), cols.data(), gw.data(), true);
    }
    if (!gx.empty()) {
        gemm(true, false, rows, plane, g.out_channels, w.data(), gy.data(), cols.data(), false);
        col2im(l, cols.data(), gx.data());
    }
    reduce_bias(gy, g.out_channels, plane, gbias);
}

void conv_transpose2d_forward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                              std::span<const float> bias, std::span<float> y) {
    const auto l = tconv_layout(g);
    const std::int64_t rows = g.out_channels * g.kernel * g.kernel;
    const std::int64_t plane = g.in_h * g.in_w;
    std::vector<float> cols(static_cast<std::size_t>(rows * plane));
    gemm(true, false, rows, plane, g.in_channels, w.data(), x.data(), cols.data(), false);
    std::fill(y.begin(), y.end(), 0.0f);
    col2im(l, cols.data(), y.data());
    add_bias(bias, g.out_channels, l.in_h * l.in_w, y.data());
}

void conv_transpose2d_backward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                               std::span<const float> gy, std::span<float> gx, std::span<float> gw,
                               std::span<float> gbias) {
    const auto l = tconv_layout(g);
    const std::int64_t rows = g.out_channels * g.kernel * g.kernel;
    const std::int64_t plane = g.in_h * g.in_w;
    std::vector<float> cols(static_cast<std::size_t>(rows * plane));
    im2col(l, gy.data(), cols.data());
    if (!gx.empty()) {
        gemm(false, false, g.in_channels, plane, rows, w.data(), cols.data(), gx.data(), true);
    }
    if (!gw.empty()) {
        gemm(false, true, g.in_channels, rows, plane, x.data(), cols.data(), gw.data(), true);
    }
    reduce_bias(gy, g.out_channels, l.in_h * l.in_w, gbias);
}

namespace reference {

void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, const float *a,
          const float *b, float *c, bool accumulate) {
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (std::int64_t p = 0; p < k; ++p) {
                const float av = trans_a ? a[p * m + i] : a[i * k + p];
                const float bv = trans_b ? b[j * k + p] : b[p * n + j];
                acc += av * bv;
            }
            c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
        }
    }
}

void conv2d_forward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> bias, std::span<float> y) {
    const std::int64_t oh = g.conv_out_h(), ow = g.conv_out_w(), k = g.kernel;
    for (std::int64_t co = 0; co < g.out_channels; ++co) {
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                float acc = bias.empty() ? 0.0f : bias[static_cast<std::size_t>(co)];
                for (std::int64_t ci = 0; ci < g.in_channels; ++ci) {
                    for (std::int64_t ky = 0; ky < k; ++ky) {
                        const std::int64_t iy = oy * g.stride - g.pad + ky;
                        if (iy < 0 || iy >= g.in_h) {
                            continue;
                        }
                        for (std::int64_t kx = 0; kx < k; ++kx) {
                            const std::int64_t ix = ox * g.stride - g.pad + kx;
                            if (ix < 0 || ix >= g.in_w) {
                                continue;
                            }
                            acc += w[static_cast<std::size_t>(((co * g.in_channels + ci) * k + ky) * k + kx)] *
                                   x[static_cast<std::size_t>((ci * g.in_h + iy) * g.in_w + ix)];
                        }
                    }
                }
                y[static_cast<std::size_t>((co * oh + oy) * ow + ox)] = acc;
            }
        }
    }
}

void conv_transpose2d_forward(const ConvGeometry &g, std::span<const float> x, std::span<const float> w,
                              std::span<const float> bias, std::span<float> y) {
    const std::int64_t oh = g.tconv_out_h(), ow = g.tconv_out_w(), k = g.kernel;
    for (std::int64_t co = 0; co < g.out_channels; ++co) {
        const float b = bias.empty() ? 0.0f : bias[static_cast<std::size_t>(co)];
        for (std::int64_t i = 0; i < oh * ow; ++i) {
            y[static_cast<std::size_t>(co * oh * ow + i)] = b;
        }
    }
    // Scatter form: each input pixel stamps its kernel onto the output.
    for (std::int64_t ci = 0; ci < g.in_channels; ++ci) {
        for (std::int64_t iy = 0; iy < g.in_h; ++iy) {
            for (std::int64_t ix = 0; ix < g.in_w; ++ix) {
                const float xv = x[static_cast<std::size_t>((ci * g.in_h + iy) * g.in_w + ix)];
                for (std::int64_t co = 0; co < g.out_channels; ++co) {
                    for (std::int64_t ky = 0; ky < k; ++ky) {
                        const std::int64_t oy = iy * g.stride - g.pad + ky;
                        if (oy < 0 || oy >= oh) {
                            continue;
                        }
                        for (std::int64_t kx = 0; kx < k; ++kx) {
                            const std::int64_t ox = ix * g.stride - g.pad + kx;
                            if (ox < 0 || ox >= ow) {
                                continue;
                            }
                            y[static_cast<std::size_t>((co * oh + oy) * ow + ox)] +=
                                xv * w[static_cast<std::size_t>(((ci * g.out_channels + co) * k + ky) * k + kx)];
                        }
                    }
                }
            }
        }
    }
}

} // namespace reference

} // namespace stylepoint::kernels
