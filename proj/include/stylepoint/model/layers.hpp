// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/tensor/adam.hpp"
#include "stylepoint/tensor/checkpoint.hpp"
#include "stylepoint/tensor/ops.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace stylepoint::model {

/// Seeded source of initial weights. The same seed and call order always
/// give the same parameters.
class ParamInit {
  public:
    explicit ParamInit(std::uint64_t seed) : rng_(seed) {}

    Tensor uniform(Shape shape, float bound);
    /// Rows of a [rows, cols] matrix made orthonormal (columns when
    /// rows > cols), times `gain`.
    std::vector<float> orthogonal(std::int64_t rows, std::int64_t cols, float gain);

  private:
    std::mt19937_64 rng_;
};

/// Parameters plus non-trainable state (batch-norm running statistics),
/// flattened to dotted names.
struct ParamList {
    std::vector<NamedTensor> params;
    std::vector<NamedTensor> buffers;

    void add_param(const std::string &name, const Tensor &t) { params.push_back({name, t}); }
    void add_buffer(const std::string &name, const Tensor &t) { buffers.push_back({name, t}); }
    void append(const ParamList &other);
    std::int64_t param_count() const;
};

/// Copies every parameter and buffer into an archive (deep copy).
Archive to_archive(const ParamList &list, const std::string &prefix = "");
/// Overwrites values in place; throws ArchiveError on a missing name or a
/// shape mismatch.
void load_from_archive(const ParamList &list, const Archive &archive, const std::string &prefix = "");

/// y = x W + b, W stored [in, out].
struct Linear {
    Tensor weight;
    Tensor bias;

    static Linear init(std::int64_t in, std::int64_t out, ParamInit &init);
    Tensor operator()(const Tensor &x) const;
    std::int64_t in_features() const { return weight.size(0); }
    std::int64_t out_features() const { return weight.size(1); }
    void collect(const std::string &name, ParamList &out) const;
};

struct BatchNorm {
    Tensor gamma;
    Tensor beta;
    mutable ops::BatchNormState state;

    static BatchNorm init(std::int64_t channels);
    Tensor operator()(const Tensor &x, bool training) const;
    void collect(const std::string &name, ParamList &out) const;
};

/// 3x3 (or 1x1) convolution on [C,H,W].
struct Conv2d {
    Tensor weight; // [Cout, Cin, k, k]
    Tensor bias;   // [Cout]
    std::int64_t stride = 1;
    std::int64_t pad = 1;

    static Conv2d init(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride, ParamInit &init);
    Tensor operator()(const Tensor &x) const;
    void collect(const std::string &name, ParamList &out) const;
};

/// Stride-2 3x3 transposed convolution that doubles H and W.
struct ConvTranspose2d {
    Tensor weight; // [Cin, Cout, 3, 3]
    Tensor bias;

    static ConvTranspose2d init(std::int64_t in, std::int64_t out, ParamInit &init);
    Tensor operator()(const Tensor &x) const;
    void collect(const std::string &name, ParamList &out) const;
};

} // namespace stylepoint::model
