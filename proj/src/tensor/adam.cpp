// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/tensor/adam.hpp"

#include <cmath>

namespace stylepoint {

void adam_step(const std::vector<NamedTensor> &params, AdamState &state, const AdamConfig &cfg) {
    for (const auto &p : params) {
        if (!p.tensor.has_grad()) {
            continue;
        }
        for (float g : p.tensor.grad()) {
            if (!std::isfinite(g)) {
                throw NonFiniteGradient("non-finite gradient in parameter '" + p.name + "'");
            }
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const float bc1 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta1), t));
    const float bc2 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta2), t));
    for (const auto &p : params) {
        Tensor w = p.tensor;
        const auto n = static_cast<std::size_t>(w.numel());
        auto &m = state.m[p.name];
        auto &v = state.v[p.name];
        if (m.size() != n) {
            m.assign(n, 0.0f);
            v.assign(n, 0.0f);
        }
        const bool has_grad = w.has_grad();
        auto data = w.data();
        const auto grad = w.grad();
        for (std::size_t i = 0; i < n; ++i) {
            const float g = has_grad ? grad[i] : 0.0f;
            m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g * g;
            const float mhat = m[i] / bc1;
            const float vhat = v[i] / bc2;
            data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

} // namespace stylepoint
