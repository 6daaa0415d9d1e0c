// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/tensor/ops.hpp"

#include "stylepoint/kernels/dense.hpp"
#include "stylepoint/tensor/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace stylepoint::ops {

namespace {

using kernels::ConvGeometry;

std::size_t sz(std::int64_t v) { return static_cast<std::size_t>(v); }

Tensor make_output(Shape shape, bool record) { return Tensor::zeros(std::move(shape), record); }

void require(bool ok, const std::string &op, const Tensor &a, const Tensor &b) {
    if (!ok) {
        throw ShapeError(op + ": incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
}

std::int64_t norm_axis(const Tensor &x, std::int64_t axis, const char *op) {
    const auto d = x.dim();
    if (axis < 0) {
        axis += d;
    }
    if (axis < 0 || axis >= d) {
        throw ShapeError(std::string(op) + ": axis out of range for shape " + shape_str(x.shape()));
    }
    return axis;
}

// [outer, n, inner] view of x around `axis`.
struct AxisView {
    std::int64_t outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const Shape &s, std::int64_t axis) {
    AxisView v;
    for (std::int64_t i = 0; i < axis; ++i) {
        v.outer *= s[sz(i)];
    }
    v.n = s[sz(axis)];
    for (std::size_t i = sz(axis) + 1; i < s.size(); ++i) {
        v.inner *= s[i];
    }
    return v;
}

Shape reduced_shape(const Shape &s, std::int64_t axis, bool keepdim) {
    Shape out = s;
    if (keepdim) {
        out[sz(axis)] = 1;
    } else {
        out.erase(out.begin() + axis);
    }
    return out;
}

// Output->input element maps for numpy-style broadcasting.
struct Broadcast {
    Shape out;
    bool same = false;
    std::vector<std::int64_t> ia, ib;
};

Broadcast broadcast(const Tensor &a, const Tensor &b, const char *op) {
    Broadcast bc;
    if (a.shape() == b.shape()) {
        bc.out = a.shape();
        bc.same = true;
        return bc;
    }
    const auto &sa = a.shape();
    const auto &sb = b.shape();
    const std::size_t d = std::max(sa.size(), sb.size());
    Shape pa(d, 1), pb(d, 1);
    std::copy(sa.begin(), sa.end(), pa.begin() + static_cast<std::ptrdiff_t>(d - sa.size()));
    std::copy(sb.begin(), sb.end(), pb.begin() + static_cast<std::ptrdiff_t>(d - sb.size()));
    bc.out.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        require(pa[i] == pb[i] || pa[i] == 1 || pb[i] == 1, op, a, b);
        bc.out[i] = std::max(pa[i], pb[i]);
    }
    std::vector<std::int64_t> stride_a(d, 0), stride_b(d, 0);
    std::int64_t acc_a = 1, acc_b = 1;
    for (std::size_t i = d; i-- > 0;) {
        stride_a[i] = pa[i] == 1 ? 0 : acc_a;
        stride_b[i] = pb[i] == 1 ? 0 : acc_b;
        acc_a *= pa[i];
        acc_b *= pb[i];
    }
    const auto total = shape_numel(bc.out);
    bc.ia.resize(sz(total));
    bc.ib.resize(sz(total));
    std::vector<std::int64_t> idx(d, 0);
    std::int64_t oa = 0, ob = 0;
    for (std::int64_t e = 0; e < total; ++e) {
        bc.ia[sz(e)] = oa;
        bc.ib[sz(e)] = ob;
        for (std::size_t i = d; i-- > 0;) {
            ++idx[i];
            oa += stride_a[i];
            ob += stride_b[i];
            if (idx[i] < bc.out[i]) {
                break;
            }
            oa -= stride_a[i] * idx[i];
            ob -= stride_b[i] * idx[i];
            idx[i] = 0;
        }
    }
    return bc;
}

enum class BinaryKind { Add, Sub, Mul };

Tensor binary(const Tensor &a, const Tensor &b, BinaryKind kind, const char *name) {
    auto bc = broadcast(a, b, name);
    const bool record = should_record({&a, &b});
    Tensor out = make_output(bc.out, record);
    auto o = out.data();
    const auto av = a.data();
    const auto bv = b.data();
    const auto total = static_cast<std::int64_t>(o.size());
    auto ia = [&](std::int64_t e) { return bc.same ? e : bc.ia[sz(e)]; };
    auto ib = [&](std::int64_t e) { return bc.same ? e : bc.ib[sz(e)]; };
#pragma omp parallel for schedule(static) if (total > 65536)
    for (std::int64_t e = 0; e < total; ++e) {
        const float x = av[sz(ia(e))];
        const float y = bv[sz(ib(e))];
        o[sz(e)] = kind == BinaryKind::Add ? x + y : kind == BinaryKind::Sub ? x - y : x * y;
    }
    if (record) {
        active_tape()->record(out, [a, b, kind, bc = std::move(bc)](std::span<const float> g) {
            const auto total = static_cast<std::int64_t>(g.size());
            if (a.requires_grad()) {
                std::vector<float> ga(sz(a.numel()), 0.0f);
                const auto bv = b.data();
                for (std::int64_t e = 0; e < total; ++e) {
                    const auto i = bc.same ? e : bc.ia[sz(e)];
                    const auto j = bc.same ? e : bc.ib[sz(e)];
                    ga[sz(i)] += kind == BinaryKind::Mul ? g[sz(e)] * bv[sz(j)] : g[sz(e)];
                }
                accumulate_grad(a, ga);
            }
            if (b.requires_grad()) {
                std::vector<float> gb(sz(b.numel()), 0.0f);
                const auto av = a.data();
                for (std::int64_t e = 0; e < total; ++e) {
                    const auto i = bc.same ? e : bc.ia[sz(e)];
                    const auto j = bc.same ? e : bc.ib[sz(e)];
                    const float ge = g[sz(e)];
                    gb[sz(j)] += kind == BinaryKind::Mul ? ge * av[sz(i)] : kind == BinaryKind::Sub ? -ge : ge;
                }
                accumulate_grad(b, gb);
            }
        });
    }
    return out;
}

// Pointwise op where the derivative is a function of (input, output).
template <class Fwd, class Deriv> Tensor unary(const Tensor &x, Fwd fwd, Deriv deriv) {
    const bool record = should_record({&x});
    Tensor out = make_output(x.shape(), record);
    auto o = out.data();
    const auto xv = x.data();
    const auto total = static_cast<std::int64_t>(o.size());
#pragma omp parallel for schedule(static) if (total > 65536)
    for (std::int64_t e = 0; e < total; ++e) {
        o[sz(e)] = fwd(xv[sz(e)]);
    }
    if (record) {
        active_tape()->record(out, [x, out, deriv](std::span<const float> g) {
            const auto xv = x.data();
            const auto ov = out.data();
            std::vector<float> gx(g.size());
            const auto total = static_cast<std::int64_t>(g.size());
#pragma omp parallel for schedule(static) if (total > 65536)
            for (std::int64_t e = 0; e < total; ++e) {
                gx[sz(e)] = g[sz(e)] * deriv(xv[sz(e)], ov[sz(e)]);
            }
            accumulate_grad(x, gx);
        });
    }
    return out;
}

} // namespace

Tensor matmul(const Tensor &a, const Tensor &b) {
    require(a.dim() == 2 && b.dim() == 2 && a.size(1) == b.size(0), "matmul", a, b);
    const auto m = a.size(0), k = a.size(1), n = b.size(1);
    const bool record = should_record({&a, &b});
    Tensor out = make_output({m, n}, record);
    kernels::gemm(false, false, m, n, k, a.data().data(), b.data().data(), out.data().data(), false);
    if (record) {
        active_tape()->record(out, [a, b, m, n, k](std::span<const float> g) {
            if (a.requires_grad()) {
                std::vector<float> ga(sz(m * k));
                kernels::gemm(false, true, m, k, n, g.data(), b.data().data(), ga.data(), false);
                accumulate_grad(a, ga);
            }
            if (b.requires_grad()) {
                std::vector<float> gb(sz(k * n));
                kernels::gemm(true, false, k, n, m, a.data().data(), g.data(), gb.data(), false);
                accumulate_grad(b, gb);
            }
        });
    }
    return out;
}

Tensor add(const Tensor &a, const Tensor &b) { return binary(a, b, BinaryKind::Add, "add"); }
Tensor sub(const Tensor &a, const Tensor &b) { return binary(a, b, BinaryKind::Sub, "sub"); }
Tensor mul(const Tensor &a, const Tensor &b) { return binary(a, b, BinaryKind::Mul, "mul"); }

Tensor scale(const Tensor &x, float s) {
    return unary(x, [s](float v) { return s * v; }, [s](float, float) { return s; });
}

Tensor add_scalar(const Tensor &x, float s) {
    return unary(x, [s](float v) { return v + s; }, [](float, float) { return 1.0f; });
}

Tensor relu(const Tensor &x) {
    return unary(x, [](float v) { return v > 0.0f ? v : 0.0f; }, [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor leaky_relu(const Tensor &x, float slope) {
    return unary(
        x, [slope](float v) { return v > 0.0f ? v : slope * v; },
        [slope](float v, float) { return v > 0.0f ? 1.0f : slope; });
}

Tensor sigmoid(const Tensor &x) {
    return unary(
        x, [](float v) { return 1.0f / (1.0f + std::exp(-v)); }, [](float, float y) { return y * (1.0f - y); });
}

Tensor exp(const Tensor &x) {
    return unary(x, [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Tensor log(const Tensor &x) {
    return unary(x, [](float v) { return std::log(v); }, [](float v, float) { return 1.0f / v; });
}

Tensor sqrt(const Tensor &x) {
    return unary(
        x, [](float v) { return std::sqrt(v); }, [](float, float y) { return y > 0.0f ? 0.5f / y : 0.0f; });
}

Tensor clamp_min(const Tensor &x, float lo) {
    return unary(
        x, [lo](float v) { return v < lo ? lo : v; }, [lo](float v, float) { return v < lo ? 0.0f : 1.0f; });
}

Tensor abs(const Tensor &x) {
    return unary(
        x, [](float v) { return std::fabs(v); },
        [](float v, float) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
}

Tensor square(const Tensor &x) {
    return unary(x, [](float v) { return v * v; }, [](float v, float) { return 2.0f * v; });
}

Tensor softmax(const Tensor &x, std::int64_t axis) {
    axis = norm_axis(x, axis, "softmax");
    const auto v = axis_view(x.shape(), axis);
    const bool record = should_record({&x});
    Tensor out = make_output(x.shape(), record);
    const auto xv = x.data();
    auto o = out.data();
#pragma omp parallel for schedule(static) if (v.outer * v.inner > 64)
    for (std::int64_t oi = 0; oi < v.outer * v.inner; ++oi) {
        const std::int64_t outer = oi / v.inner, inner = oi % v.inner;
        const std::int64_t base = outer * v.n * v.inner + inner;
        float mx = -std::numeric_limits<float>::infinity();
        for (std::int64_t i = 0; i < v.n; ++i) {
            mx = std::max(mx, xv[sz(base + i * v.inner)]);
        }
        double total = 0.0;
        for (std::int64_t i = 0; i < v.n; ++i) {
            const float e = std::exp(xv[sz(base + i * v.inner)] - mx);
            o[sz(base + i * v.inner)] = e;
            total += e;
        }
        const float inv = static_cast<float>(1.0 / total);
        for (std::int64_t i = 0; i < v.n; ++i) {
            o[sz(base + i * v.inner)] *= inv;
        }
    }
    if (record) {
        active_tape()->record(out, [x, out, v](std::span<const float> g) {
            const auto y = out.data();
            std::vector<float> gx(g.size());
            for (std::int64_t oi = 0; oi < v.outer * v.inner; ++oi) {
                const std::int64_t base = (oi / v.inner) * v.n * v.inner + oi % v.inner;
                double dot = 0.0;
                for (std::int64_t i = 0; i < v.n; ++i) {
                    dot += g[sz(base + i * v.inner)] * y[sz(base + i * v.inner)];
                }
                for (std::int64_t i = 0; i < v.n; ++i) {
                    const auto e = sz(base + i * v.inner);
                    gx[e] = y[e] * (g[e] - static_cast<float>(dot));
                }
            }
            accumulate_grad(x, gx);
        });
    }
    return out;
}

MaxResult max_reduce(const Tensor &x, std::int64_t axis) {
    axis = norm_axis(x, axis, "max_reduce");
    const auto v = axis_view(x.shape(), axis);
    if (v.n == 0) {
        throw ShapeError("max_reduce over empty axis of shape " + shape_str(x.shape()));
    }
    const bool record = should_record({&x});
    MaxResult r;
    r.values = make_output(reduced_shape(x.shape(), axis, false), record);
    r.argmax.resize(sz(v.outer * v.inner));
    const auto xv = x.data();
    auto o = r.values.data();
    for (std::int64_t oi = 0; oi < v.outer * v.inner; ++oi) {
        const std::int64_t base = (oi / v.inner) * v.n * v.inner + oi % v.inner;
        std::int64_t best = 0;
        float bv = xv[sz(base)];
        for (std::int64_t i = 1; i < v.n; ++i) {
            const float c = xv[sz(base + i * v.inner)];
            if (c > bv) {
                bv = c;
                best = i;
            }
        }
        o[sz(oi)] = bv;
        r.argmax[sz(oi)] = best;
    }
    if (record) {
        active_tape()->record(r.values, [x, v, arg = r.argmax](std::span<const float> g) {
            std::vector<float> gx(sz(x.numel()), 0.0f);
            for (std::int64_t oi = 0; oi < v.outer * v.inner; ++oi) {
                const std::int64_t base = (oi / v.inner) * v.n * v.inner + oi % v.inner;
                gx[sz(base + arg[sz(oi)] * v.inner)] += g[sz(oi)];
            }
            accumulate_grad(x, gx);
        });
    }
    return r;
}

Tensor sum(const Tensor &x, std::int64_t axis, bool keepdim) {
    axis = norm_axis(x, axis, "sum");
    const auto v = axis_view(x.shape(), axis);
    const bool record = should_record({&x});
    Tensor out = make_output(reduced_shape(x.shape(), axis, keepdim), record);
    const auto xv = x.data();
    auto o = out.data();
    for (std::int64_t oi = 0; oi < v.outer * v.inner; ++oi) {
        const std::int64_t base = (oi / v.inner) * v.n * v.inner + oi % v.inner;
        double acc = 0.0;
        for (std::int64_t i = 0; i < v.n; ++i) {
            acc += xv[sz(base + i * v.inner)];
        }
        o[sz(oi)] = static_cast<float>(acc);
    }
    if (record) {
        active_tape()->record(out, [x, v](std::span<const float> g) {
            std::vector<float> gx(sz(x.numel()));
            for (std::int64_t oi = 0; oi < v.outer * v.inner; ++oi) {
                const std::int64_t base = (oi / v.inner) * v.n * v.inner + oi % v.inner;
                for (std::int64_t i = 0; i < v.n; ++i) {
                    gx[sz(base + i * v.inner)] = g[sz(oi)];
                }
            }
            accumulate_grad(x, gx);
        });
    }
    return out;
}

Tensor mean(const Tensor &x, std::int64_t axis, bool keepdim) {
    axis = norm_axis(x, axis, "mean");
    const auto n = x.shape()[sz(axis)];
    return scale(sum(x, axis, keepdim), n > 0 ? 1.0f / static_cast<float>(n) : 0.0f);
}

Tensor var(const Tensor &x, std::int64_t axis, bool keepdim) {
    axis = norm_axis(x, axis, "var");
    const Tensor mu = mean(x, axis, true);
    return mean(square(sub(x, mu)), axis, keepdim);
}

Tensor sum_all(const Tensor &x) {
    const bool record = should_record({&x});
    Tensor out = make_output({}, record);
    double acc = 0.0;
    for (float v : x.data()) {
        acc += v;
    }
    out.data()[0] = static_cast<float>(acc);
    if (record) {
        active_tape()->record(out, [x](std::span<const float> g) {
            std::vector<float> gx(sz(x.numel()), g[0]);
            accumulate_grad(x, gx);
        });
    }
    return out;
}

Tensor mean_all(const Tensor &x) {
    const auto n = x.numel();
    return scale(sum_all(x), n > 0 ? 1.0f / static_cast<float>(n) : 0.0f);
}

Tensor conv2d(const Tensor &x, const Tensor &weight, const Tensor &bias, std::int64_t stride, std::int64_t pad) {
    require(x.dim() == 3 && weight.dim() == 4 && weight.size(1) == x.size(0) && weight.size(2) == weight.size(3),
            "conv2d", x, weight);
    if (bias.defined()) {
        require(bias.dim() == 1 && bias.size(0) == weight.size(0), "conv2d bias", bias, weight);
    }
    ConvGeometry g;
    g.in_channels = x.size(0);
    g.in_h = x.size(1);
    g.in_w = x.size(2);
    g.out_channels = weight.size(0);
    g.kernel = weight.size(2);
    g.stride = stride;
    g.pad = pad;
    if (g.conv_out_h() <= 0 || g.conv_out_w() <= 0) {
        throw ShapeError("conv2d: empty output for input " + shape_str(x.shape()) + " and kernel " +
                         shape_str(weight.shape()));
    }
    const bool record = should_record({&x, &weight, &bias});
    Tensor out = make_output({g.out_channels, g.conv_out_h(), g.conv_out_w()}, record);
    kernels::conv2d_forward(g, x.data(), weight.data(), bias.defined() ? bias.data() : std::span<const float>{},
                            out.data());
    if (record) {
        active_tape()->record(out, [x, weight, bias, g](std::span<const float> gy) {
            std::vector<float> gx(x.requires_grad() ? sz(x.numel()) : 0, 0.0f);
            std::vector<float> gw(weight.requires_grad() ? sz(weight.numel()) : 0, 0.0f);
            std::vector<float> gb(bias.requires_grad() ? sz(bias.numel()) : 0, 0.0f);
            kernels::conv2d_backward(g, x.data(), weight.data(), gy, gx, gw, gb);
            accumulate_grad(x, gx);
            accumulate_grad(weight, gw);
            if (bias.defined()) {
                accumulate_grad(bias, gb);
            }
        });
    }
    return out;
}

Tensor conv_transpose2d(const Tensor &x, const Tensor &weight, const Tensor &bias, std::int64_t stride,
                        std::int64_t pad, std::int64_t output_pad) {
    require(x.dim() == 3 && weight.dim() == 4 && weight.size(0) == x.size(0) && weight.size(2) == weight.size(3),
            "conv_transpose2d", x, weight);
    if (bias.defined()) {
        require(bias.dim() == 1 && bias.size(0) == weight.size(1), "conv_transpose2d bias", bias, weight);
    }
    ConvGeometry g;
    g.in_channels = x.size(0);
    g.in_h = x.size(1);
    g.in_w = x.size(2);
    g.out_channels = weight.size(1);
    g.kernel = weight.size(2);
    g.stride = stride;
    g.pad = pad;
    g.output_pad = output_pad;
    if (output_pad >= stride) {
        throw ShapeError("conv_transpose2d: output_pad must be smaller than stride");
    }
    const bool record = should_record({&x, &weight, &bias});
    Tensor out = make_output({g.out_channels, g.tconv_out_h(), g.tconv_out_w()}, record);
    kernels::conv_transpose2d_forward(g, x.data(), weight.data(),
                                      bias.defined() ? bias.data() : std::span<const float>{}, out.data());
    if (record) {
        active_tape()->record(out, [x, weight, bias, g](std::span<const float> gy) {
            std::vector<float> gx(x.requires_grad() ? sz(x.numel()) : 0, 0.0f);
            std::vector<float> gw(weight.requires_grad() ? sz(weight.numel()) : 0, 0.0f);
            std::vector<float> gb(bias.requires_grad() ? sz(bias.numel()) : 0, 0.0f);
            kernels::conv_transpose2d_backward(g, x.data(), weight.data(), gy, gx, gw, gb);
            accumulate_grad(x, gx);
            accumulate_grad(weight, gw);
            if (bias.defined()) {
                accumulate_grad(bias, gb);
            }
        });
    }
    return out;
}

namespace {

// Standardizes x along `axis`; shared by batch_norm (training) and
// instance_norm. Returns the standardized tensor (recorded on the tape) and
// the per-slice mean/variance.
struct Standardized {
    Tensor y;
    std::vector<float> mean, var;
};

Standardized standardize(const Tensor &x, std::int64_t axis, float eps) {
    const auto v = axis_view(x.shape(), axis);
    const bool record = should_record({&x});
    Standardized s;
    s.y = make_output(x.shape(), record);
    s.mean.resize(sz(v.outer * v.inner));
    s.var.resize(sz(v.outer * v.inner));
    std::vector<float> inv_std(sz(v.outer * v.inner));
    const auto xv = x.data();
    auto o = s.y.data();
    for (std::int64_t oi = 0; oi < v.outer * v.inner; ++oi) {
        const std::int64_t base = (oi / v.inner) * v.n * v.inner + oi % v.inner;
        double m = 0.0;
        for (std::int64_t i = 0; i < v.n; ++i) {
            m += xv[sz(base + i * v.inner)];
        }
        m /= static_cast<double>(v.n);
        double q = 0.0;
        for (std::int64_t i = 0; i < v.n; ++i) {
            const double d = xv[sz(base + i * v.inner)] - m;
            q += d * d;
        }
        q /= static_cast<double>(v.n);
        s.mean[sz(oi)] = static_cast<float>(m);
        s.var[sz(oi)] = static_cast<float>(q);
        const float is = static_cast<float>(1.0 / std::sqrt(q + eps));
        inv_std[sz(oi)] = is;
        for (std::int64_t i = 0; i < v.n; ++i) {
            const auto e = sz(base + i * v.inner);
            o[e] = (xv[e] - static_cast<float>(m)) * is;
        }
    }
    if (record) {
        active_tape()->record(s.y, [x, y = s.y, v, inv_std = std::move(inv_std)](std::span<const float> g) {
            const auto yv = y.data();
            std::vector<float> gx(g.size());
            const double n = static_cast<double>(v.n);
            for (std::int64_t oi = 0; oi < v.outer * v.inner; ++oi) {
                const std::int64_t base = (oi / v.inner) * v.n * v.inner + oi % v.inner;
                double sg = 0.0, sgy = 0.0;
                for (std::int64_t i = 0; i < v.n; ++i) {
                    const auto e = sz(base + i * v.inner);
                    sg += g[e];
                    sgy += g[e] * yv[e];
                }
                for (std::int64_t i = 0; i < v.n; ++i) {
                    const auto e = sz(base + i * v.inner);
                    gx[e] = static_cast<float>(inv_std[sz(oi)] * (g[e] - sg / n - yv[e] * sgy / n));
                }
            }
            accumulate_grad(x, gx);
        });
    }
    return s;
}

} // namespace

Tensor batch_norm(const Tensor &x, const Tensor &gamma, const Tensor &beta, BatchNormState &state, bool training) {
    require(x.dim() == 2 && gamma.numel() == x.size(1) && beta.numel() == x.size(1), "batch_norm", x, gamma);
    const auto c = x.size(1);
    if (!state.running_mean.defined()) {
        state.running_mean = Tensor::zeros({c});
        state.running_var = Tensor::full({c}, 1.0f);
    }
    const Tensor row_gamma = reshape(gamma, {1, c});
    const Tensor row_beta = reshape(beta, {1, c});
    if (training) {
        auto s = standardize(x, 0, state.eps);
        const auto n = x.size(0);
        auto rm = state.running_mean.data();
        auto rv = state.running_var.data();
        const float m = state.momentum;
        for (std::int64_t j = 0; j < c; ++j) {
            const float unbiased = n > 1 ? s.var[sz(j)] * static_cast<float>(n) / static_cast<float>(n - 1)
                                         : s.var[sz(j)];
            rm[sz(j)] = (1.0f - m) * rm[sz(j)] + m * s.mean[sz(j)];
            rv[sz(j)] = (1.0f - m) * rv[sz(j)] + m * unbiased;
        }
        return add(mul(s.y, row_gamma), row_beta);
    }
    std::vector<float> shift(sz(c)), inv(sz(c));
    for (std::int64_t j = 0; j < c; ++j) {
        inv[sz(j)] = 1.0f / std::sqrt(state.running_var.data()[sz(j)] + state.eps);
        shift[sz(j)] = -state.running_mean.data()[sz(j)] * inv[sz(j)];
    }
    const Tensor xs = add(mul(x, Tensor::from({1, c}, inv)), Tensor::from({1, c}, shift));
    return add(mul(xs, row_gamma), row_beta);
}

Tensor instance_norm(const Tensor &x, std::int64_t axis, float eps) {
    axis = norm_axis(x, axis, "instance_norm");
    return standardize(x, axis, eps).y;
}

Tensor concat(const std::vector<Tensor> &parts, std::int64_t axis) {
    if (parts.empty()) {
        throw ShapeError("concat of zero tensors");
    }
    axis = norm_axis(parts[0], axis, "concat");
    Shape out_shape = parts[0].shape();
    std::int64_t total = 0;
    for (const auto &p : parts) {
        require(p.dim() == parts[0].dim(), "concat", parts[0], p);
        for (std::int64_t d = 0; d < p.dim(); ++d) {
            require(d == axis || p.shape()[sz(d)] == parts[0].shape()[sz(d)], "concat", parts[0], p);
        }
        total += p.shape()[sz(axis)];
    }
    out_shape[sz(axis)] = total;
    bool record = false;
    for (const auto &p : parts) {
        record = record || should_record({&p});
    }
    Tensor out = make_output(out_shape, record);
    const auto ov = axis_view(out_shape, axis);
    auto o = out.data();
    std::int64_t offset = 0;
    std::vector<std::int64_t> offsets;
    for (const auto &p : parts) {
        offsets.push_back(offset);
        const auto pv = axis_view(p.shape(), axis);
        const auto src = p.data();
        for (std::int64_t outer = 0; outer < pv.outer; ++outer) {
            std::copy_n(src.begin() + outer * pv.n * pv.inner, pv.n * pv.inner,
                        o.begin() + (outer * ov.n + offset) * ov.inner);
        }
        offset += pv.n;
    }
    if (record) {
        active_tape()->record(out, [parts, offsets, ov, axis](std::span<const float> g) {
            for (std::size_t k = 0; k < parts.size(); ++k) {
                const auto &p = parts[k];
                if (!p.requires_grad()) {
                    continue;
                }
                const auto pv = axis_view(p.shape(), axis);
                std::vector<float> gp(sz(p.numel()));
                for (std::int64_t outer = 0; outer < pv.outer; ++outer) {
                    std::copy_n(g.begin() + (outer * ov.n + offsets[k]) * ov.inner, pv.n * pv.inner,
                                gp.begin() + outer * pv.n * pv.inner);
                }
                accumulate_grad(p, gp);
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor &x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    const bool record = should_record({&x});
    Tensor out = Tensor::from(std::move(shape), x.to_vector(), record);
    if (record) {
        active_tape()->record(out, [x](std::span<const float> g) { accumulate_grad(x, g); });
    }
    return out;
}

Tensor transpose(const Tensor &x) {
    if (x.dim() != 2) {
        throw ShapeError("transpose expects a 2-D tensor, got " + shape_str(x.shape()));
    }
    const auto r = x.size(0), c = x.size(1);
    const bool record = should_record({&x});
    Tensor out = make_output({c, r}, record);
    const auto xv = x.data();
    auto o = out.data();
    for (std::int64_t i = 0; i < r; ++i) {
        for (std::int64_t j = 0; j < c; ++j) {
            o[sz(j * r + i)] = xv[sz(i * c + j)];
        }
    }
    if (record) {
        active_tape()->record(out, [x, r, c](std::span<const float> g) {
            std::vector<float> gx(sz(r * c));
            for (std::int64_t i = 0; i < r; ++i) {
                for (std::int64_t j = 0; j < c; ++j) {
                    gx[sz(i * c + j)] = g[sz(j * r + i)];
                }
            }
            accumulate_grad(x, gx);
        });
    }
    return out;
}

Tensor gather(const Tensor &x, const std::vector<std::int64_t> &index) {
    if (x.dim() < 1) {
        throw ShapeError("gather on a scalar");
    }
    const auto rows = x.size(0);
    const auto row = rows > 0 ? x.numel() / rows : 0;
    Shape out_shape = x.shape();
    out_shape[0] = static_cast<std::int64_t>(index.size());
    const bool record = should_record({&x});
    Tensor out = make_output(out_shape, record);
    const auto xv = x.data();
    auto o = out.data();
    for (std::size_t m = 0; m < index.size(); ++m) {
        if (index[m] < 0 || index[m] >= rows) {
            throw std::out_of_range("gather: index " + std::to_string(index[m]) + " outside " +
                                    shape_str(x.shape()));
        }
        std::copy_n(xv.begin() + index[m] * row, row, o.begin() + static_cast<std::int64_t>(m) * row);
    }
    if (record) {
        active_tape()->record(out, [x, index, row](std::span<const float> g) {
            std::vector<float> gx(sz(x.numel()), 0.0f);
            for (std::size_t m = 0; m < index.size(); ++m) {
                for (std::int64_t c = 0; c < row; ++c) {
                    gx[sz(index[m] * row + c)] += g[m * sz(row) + sz(c)];
                }
            }
            accumulate_grad(x, gx);
        });
    }
    return out;
}

Tensor scatter_add(const Tensor &x, const std::vector<std::int64_t> &index, std::int64_t rows) {
    if (x.dim() < 1 || x.size(0) != static_cast<std::int64_t>(index.size())) {
        throw ShapeError("scatter_add: " + std::to_string(index.size()) + " indices for shape " +
                         shape_str(x.shape()));
    }
    const auto row = x.size(0) > 0 ? x.numel() / x.size(0) : 0;
    Shape out_shape = x.shape();
    out_shape[0] = rows;
    const bool record = should_record({&x});
    Tensor out = make_output(out_shape, record);
    const auto xv = x.data();
    auto o = out.data();
    for (std::size_t m = 0; m < index.size(); ++m) {
        if (index[m] < 0 || index[m] >= rows) {
            throw std::out_of_range("scatter_add: index " + std::to_string(index[m]) + " outside " +
                                    std::to_string(rows) + " rows");
        }
        for (std::int64_t c = 0; c < row; ++c) {
            o[sz(index[m] * row + c)] += xv[m * sz(row) + sz(c)];
        }
    }
    if (record) {
        active_tape()->record(out, [x, index, row](std::span<const float> g) {
            std::vector<float> gx(sz(x.numel()));
            for (std::size_t m = 0; m < index.size(); ++m) {
                std::copy_n(g.begin() + index[m] * row, row, gx.begin() + static_cast<std::int64_t>(m) * row);
            }
            accumulate_grad(x, gx);
        });
    }
    return out;
}

Tensor sparse_mix(const Tensor &x, const kernels::SparseMap &map, std::int64_t channels, kernels::Layout in_layout,
                  kernels::Layout out_layout, Shape out_shape) {
    if (x.numel() != map.cols * channels) {
        throw ShapeError("sparse_mix: input " + shape_str(x.shape()) + " does not hold " + std::to_string(map.cols) +
                         " items of " + std::to_string(channels) + " channels");
    }
    if (shape_numel(out_shape) != map.rows * channels) {
        throw ShapeError("sparse_mix: output shape " + shape_str(out_shape) + " does not hold " +
                         std::to_string(map.rows) + " items of " + std::to_string(channels) + " channels");
    }
    const bool record = should_record({&x});
    Tensor out = make_output(std::move(out_shape), record);
    kernels::sparse_mix(map, channels, x.data(), in_layout, out.data(), out_layout);
    if (record) {
        active_tape()->record(out, [x, t = map.transposed(), channels, in_layout, out_layout](
                                       std::span<const float> g) {
            std::vector<float> gx(sz(x.numel()));
            kernels::sparse_mix(t, channels, g, out_layout, gx, in_layout);
            accumulate_grad(x, gx);
        });
    }
    return out;
}

Tensor max_relative(const Tensor &src, const Tensor &center, const std::vector<std::int64_t> &offsets,
                    const std::vector<std::int64_t> &neighbors) {
    require(src.dim() == 2 && center.dim() == 2 && src.size(1) == center.size(1), "max_relative", src, center);
    const auto nq = center.size(0);
    const auto c = center.size(1);
    if (static_cast<std::int64_t>(offsets.size()) != nq + 1) {
        throw ShapeError("max_relative: " + std::to_string(offsets.size() - 1) + " neighbor lists for " +
                         std::to_string(nq) + " queries");
    }
    const bool record = should_record({&src, &center});
    Tensor out = make_output({nq, c}, record);
    std::vector<std::int64_t> arg(sz(nq * c), -1);
    const auto sv = src.data();
    const auto cv = center.data();
    auto o = out.data();
    const auto ns = src.size(0);
    for (auto j : neighbors) {
        if (j < 0 || j >= ns) {
            throw std::out_of_range("max_relative: neighbor " + std::to_string(j) + " outside " +
                                    shape_str(src.shape()));
        }
    }
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t q = 0; q < nq; ++q) {
        for (auto e = offsets[sz(q)]; e < offsets[sz(q) + 1]; ++e) {
            const auto j = neighbors[sz(e)];
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const float d = sv[sz(j * c + ch)] - cv[sz(q * c + ch)];
                auto &a = arg[sz(q * c + ch)];
                if (a < 0 || d > o[sz(q * c + ch)]) {
                    o[sz(q * c + ch)] = d;
                    a = j;
                }
            }
        }
    }
    if (record) {
        active_tape()->record(out, [src, center, arg = std::move(arg), c](std::span<const float> g) {
            std::vector<float> gs(sz(src.numel()), 0.0f), gc(sz(center.numel()), 0.0f);
            for (std::size_t i = 0; i < arg.size(); ++i) {
                if (arg[i] >= 0) {
                    const auto ch = static_cast<std::int64_t>(i) % c;
                    gs[sz(arg[i] * c + ch)] += g[i];
                    gc[i] -= g[i];
                }
            }
            accumulate_grad(src, gs);
            accumulate_grad(center, gc);
        });
    }
    return out;
}

} // namespace stylepoint::ops
