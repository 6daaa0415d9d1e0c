// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/render/decoder.hpp"
#include "stylepoint/render/rasterizer.hpp"

#include <span>

namespace stylepoint::render {

struct RenderConfig {
    RasterConfig raster;
    int idw_neighbors = 3;
    float idw_power = 2.0f;
};

struct RenderedView {
    SplatPlan plan;
    Tensor point_features; // [N, C] at full cloud resolution
    Tensor feature_map;    // [C, H, W]
    Tensor image;          // [3, H, W]

    int width() const { return plan.width; }
    int height() const { return plan.height; }
};

/// Upsamples `features` (at `feature_positions`) to every cloud point,
/// splats them into `camera` and decodes. A precomputed plan for the same
/// cloud and camera may be passed to skip the geometry pass.
RenderedView render_view(const ScenePointCloud &cloud, std::span<const float> feature_positions,
                         const Tensor &features, const CameraSpec &camera, const DecoderParams &decoder,
                         const RenderConfig &cfg = {}, const SplatPlan *plan = nullptr);

/// Decoded [3,H,W] tensor as an image.
RgbImage to_image(const Tensor &planar);

} // namespace stylepoint::render
