// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/geometry/point_cloud.hpp"
#include "stylepoint/model/layers.hpp"
#include "stylepoint/pointcloud/kernels.hpp"

#include <cstdint>
#include <vector>

namespace stylepoint::model {

struct StageConfig {
    int layers = 1;
    int channels = 64;
    int downsample = 4;
    float radius = 0.06f;
    int max_neighbors = 16;
};

struct EncoderConfig {
    std::vector<StageConfig> stages = {
        {1, 64, 4, 0.06f, 16},
        {2, 128, 4, 0.12f, 16},
        {2, 256, 4, 0.24f, 16},
    };
    int in_channels = 6; // RGB + NDC position

    /// Throws std::invalid_argument unless channels strictly increase and
    /// every stage is well formed.
    void validate() const;
    int out_channels() const { return stages.back().channels; }
    /// Smallest accepted cloud: the product of the downsample factors.
    std::int64_t min_points() const;
};

struct MrConvParams {
    Linear linear; // [2 * Cin, Cout]
    BatchNorm norm;

    static MrConvParams init(std::int64_t in, std::int64_t out, ParamInit &init);
    void collect(const std::string &name, ParamList &out) const;
};

/// h_i = BN(ReLU(W [x_i, max_j (x_j - x_i)] + b)). `src` holds the
/// features the graph indexes; `center` holds x_i for each query.
Tensor mr_conv(const Tensor &src, const Tensor &center, const pointcloud::NeighborGraph &graph,
               const MrConvParams &params, bool training);

struct EncoderParams {
    std::vector<std::vector<MrConvParams>> stages;
    std::vector<Linear> shortcut; // one per stage; unused (empty) for 1-layer stages

    static EncoderParams init(const EncoderConfig &cfg, ParamInit &init);
    void collect(const std::string &name, ParamList &out) const;
};

/// Sampling and neighborhoods of every stage. Depends only on positions, so
/// it is computed once per scene.
struct EncoderGeometry {
    struct Level {
        std::vector<std::int64_t> pick;       // FPS indices into the previous level
        std::vector<float> positions;         // selected points, N' x 3
        pointcloud::NeighborGraph entry;      // queries: this level, sources: previous level
        pointcloud::NeighborGraph within;     // queries and sources: this level
        std::vector<std::int64_t> lineage;    // indices into the full cloud
    };
    std::vector<Level> levels;
    std::int64_t input_points = 0;
};

EncoderGeometry build_encoder_geometry(std::span<const float> positions, const EncoderConfig &cfg);

/// Per-point encoder input: RGB and NDC position, [N, 6].
Tensor encoder_input(const ScenePointCloud &cloud);

struct ContentFeatures {
    std::vector<float> positions;      // N' x 3 NDC
    Tensor features;                   // [N', C]
    std::vector<std::int64_t> lineage; // indices into the full cloud
};

ContentFeatures encode(const Tensor &input, const EncoderGeometry &geometry, const EncoderConfig &cfg,
                       const EncoderParams &params, bool training);

/// Convenience: geometry + input + encode in one call.
ContentFeatures encode(const ScenePointCloud &cloud, const EncoderConfig &cfg, const EncoderParams &params,
                       bool training);

} // namespace stylepoint::model
