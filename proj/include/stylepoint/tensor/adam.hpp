// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/tensor/tensor.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylepoint {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct AdamConfig {
    float lr = 1e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

struct AdamState {
    std::int64_t step = 0;
    std::map<std::string, std::vector<float>> m;
    std::map<std::string, std::vector<float>> v;
};

class NonFiniteGradient : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// One bias-corrected Adam update over `params`, reading each parameter's
/// accumulated gradient (a parameter without one is treated as having a zero
/// gradient). Throws NonFiniteGradient naming the first offending parameter
/// before anything is modified.
void adam_step(const std::vector<NamedTensor> &params, AdamState &state, const AdamConfig &cfg);

} // namespace stylepoint
