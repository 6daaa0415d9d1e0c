// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/geometry/point_cloud.hpp"
#include "stylepoint/kernels/sparse.hpp"
#include "stylepoint/tensor/tensor.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

// Soft-z point splatting into a target camera. Geometry (where each point
// lands and with what weight) is computed once per (cloud, camera) as a
// SplatPlan; rasterizing features through a plan is linear and
// differentiable in the features.
namespace stylepoint::render {

struct RasterConfig {
    float lambda = 50.0f; // soft-z sharpness, depth measured in units of the far plane
    float tau = 1e-2f;    // relative depth tolerance for visibility
};

/// Footprint taps lighter than this count as misses, so float round-off in
/// NDC positions does not smear a centered point onto its neighbors.
inline constexpr float kMinTapWeight = 1e-6f;

/// One pixel of a point's 2x2 bilinear footprint.
struct FootprintTap {
    int x = 0;
    int y = 0;
    float weight = 0.0f;
};

/// The four pixels whose centers surround continuous image position (px, py)
/// with their bilinear weights (which sum to 1). Taps may lie outside the
/// image; weight-0 taps are kept.
std::array<FootprintTap, 4> bilinear_footprint(double px, double py);

struct SplatPlan {
    int width = 0;
    int height = 0;
    /// rows = pixels (row-major), cols = points; normalized composite
    /// weights, point-index order inside each row.
    kernels::SparseMap map;
    std::vector<float> zbuffer;          // camera depth of the nearest contributor; +inf when uncovered
    std::vector<std::uint8_t> coverage;  // per pixel
    std::vector<std::uint8_t> visible;   // per point
    std::vector<float> pixel_xy;         // per point continuous (x, y); NaN behind the camera
    std::vector<float> depth;            // per point camera depth; NaN behind the camera
    std::int64_t behind_camera = 0;

    std::int64_t points() const { return static_cast<std::int64_t>(visible.size()); }
    std::int64_t covered() const;
};

/// Camera-space positions of NDC points for `camera`.
std::vector<double> to_target_camera(std::span<const float> ndc_positions, const NdcRecord &record,
                                     const CameraSpec &camera);

/// Points at or behind the camera plane are skipped and counted in
/// behind_camera.
SplatPlan plan_splats(std::span<const float> ndc_positions, const NdcRecord &record, const CameraSpec &camera,
                      const RasterConfig &cfg = {});

/// features [N, C] -> [C, H, W]; uncovered pixels are 0.
Tensor rasterize(const Tensor &features, const SplatPlan &plan);

/// Inside the image and within tau * depth of the z-buffer at its pixel.
bool point_visible(double px, double py, double depth, const SplatPlan &plan, float tau);

namespace reference {
SplatPlan plan_splats(std::span<const float> ndc_positions, const NdcRecord &record, const CameraSpec &camera,
                      const RasterConfig &cfg = {});
}

} // namespace stylepoint::render
