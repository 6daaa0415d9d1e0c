// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/model/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace stylepoint::model {

Tensor ParamInit::uniform(Shape shape, float bound) {
    std::uniform_real_distribution<float> u(-bound, bound);
    std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto &x : v) {
        x = u(rng_);
    }
    return Tensor::from(std::move(shape), std::move(v), true);
}

std::vector<float> ParamInit::orthogonal(std::int64_t rows, std::int64_t cols, float gain) {
    std::normal_distribution<double> n(0.0, 1.0);
    const bool tall = rows >= cols;
    const auto big = tall ? rows : cols, small = tall ? cols : rows;
    Eigen::MatrixXd a(big, small);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = n(rng_);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
    // Sign fix so the result does not depend on the QR convention.
    const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < small; ++j) {
        if (r(j, j) < 0) {
            q.col(j) *= -1.0;
        }
    }
    std::vector<float> out(static_cast<std::size_t>(rows * cols));
    for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t j = 0; j < cols; ++j) {
            out[static_cast<std::size_t>(i * cols + j)] = static_cast<float>(gain * (tall ? q(i, j) : q(j, i)));
        }
    }
    return out;
}

void ParamList::append(const ParamList &other) {
    params.insert(params.end(), other.params.begin(), other.params.end());
    buffers.insert(buffers.end(), other.buffers.begin(), other.buffers.end());
}

std::int64_t ParamList::param_count() const {
    std::int64_t n = 0;
    for (const auto &p : params) {
        n += p.tensor.numel();
    }
    return n;
}

Archive to_archive(const ParamList &list, const std::string &prefix) {
    Archive a;
    for (const auto *group : {&list.params, &list.buffers}) {
        for (const auto &p : *group) {
            a[prefix + p.name] = p.tensor.detach();
        }
    }
    return a;
}

void load_from_archive(const ParamList &list, const Archive &archive, const std::string &prefix) {
    for (const auto *group : {&list.params, &list.buffers}) {
        for (const auto &p : *group) {
            const auto it = archive.find(prefix + p.name);
            if (it == archive.end()) {
                throw ArchiveError("checkpoint has no entry '" + prefix + p.name + "'");
            }
            if (it->second.shape() != p.tensor.shape()) {
                throw ArchiveError("checkpoint entry '" + prefix + p.name + "' has shape " +
                                   shape_str(it->second.shape()) + ", model expects " + shape_str(p.tensor.shape()));
            }
            Tensor dst = p.tensor;
            std::copy(it->second.data().begin(), it->second.data().end(), dst.data().begin());
        }
    }
}

Linear Linear::init(std::int64_t in, std::int64_t out, ParamInit &init) {
    Linear l;
    l.weight = init.uniform({in, out}, std::sqrt(6.0f / static_cast<float>(in)));
    l.bias = Tensor::zeros({out}, true);
    return l;
}

Tensor Linear::operator()(const Tensor &x) const { return ops::matmul(x, weight) + bias; }

void Linear::collect(const std::string &name, ParamList &out) const {
    out.add_param(name + ".weight", weight);
    out.add_param(name + ".bias", bias);
}

BatchNorm BatchNorm::init(std::int64_t channels) {
    BatchNorm b;
    b.gamma = Tensor::full({channels}, 1.0f, true);
    b.beta = Tensor::zeros({channels}, true);
    b.state.running_mean = Tensor::zeros({channels});
    b.state.running_var = Tensor::full({channels}, 1.0f);
    return b;
}

Tensor BatchNorm::operator()(const Tensor &x, bool training) const {
    return ops::batch_norm(x, gamma, beta, state, training);
}

void BatchNorm::collect(const std::string &name, ParamList &out) const {
    out.add_param(name + ".gamma", gamma);
    out.add_param(name + ".beta", beta);
    out.add_buffer(name + ".running_mean", state.running_mean);
    out.add_buffer(name + ".running_var", state.running_var);
}

Conv2d Conv2d::init(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride, ParamInit &init) {
    Conv2d c;
    c.weight = init.uniform({out, in, kernel, kernel}, std::sqrt(6.0f / static_cast<float>(in * kernel * kernel)));
    c.bias = Tensor::zeros({out}, true);
    c.stride = stride;
    c.pad = kernel / 2;
    return c;
}

Tensor Conv2d::operator()(const Tensor &x) const { return ops::conv2d(x, weight, bias, stride, pad); }

void Conv2d::collect(const std::string &name, ParamList &out) const {
    out.add_param(name + ".weight", weight);
    out.add_param(name + ".bias", bias);
}

ConvTranspose2d ConvTranspose2d::init(std::int64_t in, std::int64_t out, ParamInit &init) {
    ConvTranspose2d c;
    // Each output pixel of a stride-2 3x3 transposed conv sees about in*9/4
    // inputs.
    c.weight = init.uniform({in, out, 3, 3}, std::sqrt(6.0f / (static_cast<float>(in) * 9.0f / 4.0f)));
    c.bias = Tensor::zeros({out}, true);
    return c;
}

Tensor ConvTranspose2d::operator()(const Tensor &x) const { return ops::conv_transpose2d(x, weight, bias, 2, 1, 1); }

void ConvTranspose2d::collect(const std::string &name, ParamList &out) const {
    out.add_param(name + ".weight", weight);
    out.add_param(name + ".bias", bias);
}

} // namespace stylepoint::model
