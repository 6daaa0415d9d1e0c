// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/geometry/point_cloud.hpp"
#include "stylepoint/model/stylizer.hpp"
#include "stylepoint/render/rasterizer.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylepoint::eval {

/// Raised when a view pair shares no visible point.
class NoCovisibilityError : public std::runtime_error {
  public:
    NoCovisibilityError(int i, int j);
    int i, j;
};

struct WarpResult {
    RgbImage image;                 // zero outside the mask
    std::vector<std::uint8_t> mask; // row-major, 1 where a point landed
    std::size_t covisible_points = 0;
    std::size_t masked_pixels() const;
};

/// Moves the colors of view i onto view j through the cloud: every point
/// visible in both views carries I_i sampled bilinearly at its view-i
/// position to the pixel it projects to in view j. When several points land
/// on one pixel the one nearest to camera j wins. `pair_i`/`pair_j` only label
/// the error.
WarpResult warp(const RgbImage &source, const render::SplatPlan &plan_i, const render::SplatPlan &plan_j,
                int pair_i = 0, int pair_j = 1);

WarpResult warp(const RgbImage &source, const ScenePointCloud &cloud, const CameraSpec &cam_i,
                const CameraSpec &cam_j, const render::RasterConfig &cfg = {});

/// Root mean square difference over masked pixels and the three channels.
double masked_rmse(const RgbImage &warped, const RgbImage &target, const std::vector<std::uint8_t> &mask);

/// Frozen-pyramid feature distance restricted to the mask: both images are
/// cropped to the mask's bounding box, pixels outside the mask take the
/// target's value, and per-level squared feature differences are weighted by
/// the mask's coverage of each cell. Mean over levels.
double masked_feature_distance(const RgbImage &warped, const RgbImage &target, const std::vector<std::uint8_t> &mask,
                               const model::StylePyramid &pyramid);

double psnr(const RgbImage &a, const RgbImage &b);

enum class PairRange { Short, Long };
const char *to_string(PairRange r);

struct PairMetrics {
    int i = 0, j = 0;
    PairRange range = PairRange::Short;
    double rmse = 0.0;
    double feature_distance = 0.0;
    std::size_t covisible_pixels = 0;
};

struct ExcludedPair {
    int i = 0, j = 0;
    PairRange range = PairRange::Short;
    std::string reason;
};

struct RangeSummary {
    std::size_t pairs = 0;
    double mean_rmse = 0.0;
    double mean_feature_distance = 0.0;
};

struct ConsistencyReport {
    std::vector<PairMetrics> pairs;
    std::vector<ExcludedPair> excluded;
    RangeSummary short_range, long_range, all;
};

struct ConsistencyOptions {
    int long_stride = 7;
    bool feature_distance = true;
    render::RasterConfig raster;
};

/// Pairs (k, k+1) and (k, k+stride) along the trajectory; view k is warped
/// onto view k+d. Pairs without co-visible pixels are listed as excluded.
ConsistencyReport consistency_rmse(const std::vector<RgbImage> &views, const std::vector<CameraSpec> &cameras,
                                   const ScenePointCloud &cloud, const ConsistencyOptions &opt = {});

/// Means recomputed from `pairs`.
void summarize(ConsistencyReport &report);

std::string report_json(const ConsistencyReport &report);
void write_report_json(const std::filesystem::path &path, const ConsistencyReport &report);
/// One row per pair plus summary rows.
void write_report_csv(const std::filesystem::path &path, const ConsistencyReport &report);

} // namespace stylepoint::eval
