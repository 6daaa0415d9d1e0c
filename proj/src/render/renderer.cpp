// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/render/renderer.hpp"

#include "stylepoint/pointcloud/kernels.hpp"

namespace stylepoint::render {

RenderedView render_view(const ScenePointCloud &cloud, std::span<const float> feature_positions,
                         const Tensor &features, const CameraSpec &camera, const DecoderParams &decoder,
                         const RenderConfig &cfg, const SplatPlan *plan) {
    RenderedView v;
    v.plan = plan ? *plan : plan_splats(cloud.positions, cloud.record, camera, cfg.raster);
    if (v.plan.points() != static_cast<std::int64_t>(cloud.size()) || v.plan.width != camera.width ||
        v.plan.height != camera.height) {
        throw std::invalid_argument("render_view: splat plan does not match the cloud and camera");
    }
    v.point_features =
        pointcloud::idw_interpolate(cloud.positions, feature_positions, features, cfg.idw_neighbors, cfg.idw_power);
    v.feature_map = rasterize(v.point_features, v.plan);
    v.image = decode(v.feature_map, decoder);
    return v;
}

RgbImage to_image(const Tensor &planar) {
    if (planar.dim() != 3 || planar.size(0) != 3) {
        throw ShapeError("to_image expects [3,H,W], got " + shape_str(planar.shape()));
    }
    return RgbImage::from_planar(static_cast<int>(planar.size(2)), static_cast<int>(planar.size(1)), planar.data());
}

} // namespace stylepoint::render
