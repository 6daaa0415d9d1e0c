// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/geometry/camera.hpp"
#include "stylepoint/geometry/image.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylepoint {

class GeometryError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Per-pixel metric depth: z-distance along the optical axis, not ray length.
/// NaN, non-finite and non-positive entries are invalid.
struct DepthRaster {
    int width = 0;
    int height = 0;
    std::vector<float> depth;

    DepthRaster() = default;
    DepthRaster(int w, int h, float fill) : width(w), height(h), depth(static_cast<std::size_t>(w) * h, fill) {}

    bool valid(std::size_t i) const { return std::isfinite(depth[i]) && depth[i] > 0.0f; }
    std::size_t valid_count() const;
};

/// Layered depth image: per pixel, front-to-back (depth, color) layers.
struct LayeredDepthRaster {
    struct Layer {
        float depth = 0.0f;
        std::array<std::uint8_t, 3> rgb{};
    };
    int width = 0;
    int height = 0;
    std::vector<std::vector<Layer>> pixels; // row-major

    /// Throws GeometryError when a pixel's depths are not strictly increasing
    /// or not positive.
    void validate() const;
    std::size_t layer_count() const;
};

/// Colored points in world space, in back-projection order.
struct ColoredPoints {
    std::vector<float> xyz; // N x 3
    std::vector<float> rgb; // N x 3
    std::vector<std::int64_t> source_pixel;

    std::size_t size() const { return source_pixel.size(); }
    void append(const ColoredPoints &other);
};

/// What is needed to invert the NDC map.
struct NdcRecord {
    double near = 1.0;
    double far = 10.0;
    CameraSpec anchor;
};

/// Scene point cloud in anchor-camera NDC ([-1,1]^3, z linear in disparity,
/// +1 at the near plane and -1 at the far plane).
struct ScenePointCloud {
    std::vector<float> positions; // N x 3
    std::vector<float> colors;    // N x 3 in [0,1]
    std::vector<std::int64_t> source_pixel;
    NdcRecord record;

    std::size_t size() const { return source_pixel.size(); }
};

/// One point per valid pixel, row-major order.
ColoredPoints back_project(const RgbImage &image, const DepthRaster &depth, const CameraSpec &cam);
/// One point per (pixel, layer); colors come from the layers.
ColoredPoints back_project(const RgbImage &image, const LayeredDepthRaster &ldi, const CameraSpec &cam);

/// Maps world points into the anchor camera's NDC cube. Points at or behind
/// the camera plane are rejected with their index; coordinates that exceed
/// the cube by more than rounding are rejected too.
ScenePointCloud normalize_ndc(const ColoredPoints &points, const CameraSpec &anchor, double near, double far);

/// Inverse of normalize_ndc for one point.
Eigen::Vector3d denormalize(const Eigen::Vector3d &ndc, const NdcRecord &record);

/// (0.95 * min depth, 1.05 * max depth) over anchor-camera depths.
std::pair<double, double> depth_bounds(const ColoredPoints &points, const CameraSpec &anchor);

struct ViewInput {
    RgbImage image;
    DepthRaster depth;
    CameraSpec camera;
};

struct MergeReport {
    std::vector<std::string> warnings;
    std::size_t dropped_outside_anchor = 0;
};

/// Back-projects every view and normalizes the union into the NDC space of
/// views[center_index]. Views without valid depth are skipped with a warning;
/// points outside the anchor frustum are dropped and counted.
ScenePointCloud merge_views(const std::vector<ViewInput> &views, std::size_t center_index,
                            MergeReport *report = nullptr);

// File formats (see docs/formats.md).
inline constexpr char kDepthMagic[4] = {'D', 'P', 'T', 'H'};
inline constexpr char kLdiMagic[4] = {'L', 'D', 'I', '0'};

void write_depth(const std::filesystem::path &path, const DepthRaster &depth);
DepthRaster read_depth(const std::filesystem::path &path);
void write_ldi(const std::filesystem::path &path, const LayeredDepthRaster &ldi);
LayeredDepthRaster read_ldi(const std::filesystem::path &path);
/// ASCII PLY with x y z red green blue (colors as uchar).
void write_ply(const std::filesystem::path &path, std::span<const float> xyz, std::span<const float> rgb);

} // namespace stylepoint
