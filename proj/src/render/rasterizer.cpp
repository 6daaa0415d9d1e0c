// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/render/rasterizer.hpp"

#include "stylepoint/tensor/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace stylepoint::render {

namespace {

std::size_t sz(std::int64_t v) { return static_cast<std::size_t>(v); }

constexpr float kNan = std::numeric_limits<float>::quiet_NaN();
constexpr float kInf = std::numeric_limits<float>::infinity();

std::int64_t point_count(std::span<const float> pts) {
    if (pts.size() % 3 != 0) {
        throw std::invalid_argument("point array length " + std::to_string(pts.size()) + " is not a multiple of 3");
    }
    return static_cast<std::int64_t>(pts.size() / 3);
}

Eigen::Vector3d camera_point(std::span<const float> ndc, std::int64_t i, const NdcRecord &record,
                             const CameraSpec &camera) {
    const Eigen::Vector3d p(ndc[sz(i * 3)], ndc[sz(i * 3 + 1)], ndc[sz(i * 3 + 2)]);
    return camera.to_camera(denormalize(p, record));
}

// Weight of one contributor relative to the pixel's nearest one.
inline double soft_z(double bil, double z, double zmin, double lambda, double far) {
    return bil * std::exp(-lambda * (z - zmin) / far);
}

void init_plan(SplatPlan &plan, const CameraSpec &camera, std::int64_t n) {
    camera.validate();
    plan.width = camera.width;
    plan.height = camera.height;
    const auto pixels = sz(static_cast<std::int64_t>(camera.width) * camera.height);
    plan.zbuffer.assign(pixels, kInf);
    plan.coverage.assign(pixels, 0);
    plan.visible.assign(sz(n), 0);
    plan.pixel_xy.assign(sz(n * 2), kNan);
    plan.depth.assign(sz(n), kNan);
    plan.map = kernels::SparseMap{};
    plan.map.cols = n;
}

void check_config(const RasterConfig &cfg) {
    if (!(cfg.lambda >= 0.0f) || !(cfg.tau >= 0.0f)) {
        throw std::invalid_argument("rasterizer: lambda and tau must be non-negative");
    }
}

} // namespace

std::array<FootprintTap, 4> bilinear_footprint(double px, double py) {
    // Pixel centers sit at integer + 0.5.
    const double fx = px - 0.5, fy = py - 0.5;
    const double x0 = std::floor(fx), y0 = std::floor(fy);
    const double ax = fx - x0, ay = fy - y0;
    const int ix = static_cast<int>(x0), iy = static_cast<int>(y0);
    return {{{ix, iy, static_cast<float>((1 - ax) * (1 - ay))},
             {ix + 1, iy, static_cast<float>(ax * (1 - ay))},
             {ix, iy + 1, static_cast<float>((1 - ax) * ay)},
             {ix + 1, iy + 1, static_cast<float>(ax * ay)}}};
}

std::int64_t SplatPlan::covered() const {
    std::int64_t c = 0;
    for (auto v : coverage) c += v;
    return c;
}

std::vector<double> to_target_camera(std::span<const float> ndc_positions, const NdcRecord &record,
                                     const CameraSpec &camera) {
    const auto n = point_count(ndc_positions);
    std::vector<double> out(sz(n * 3));
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto c = camera_point(ndc_positions, i, record, camera);
        for (int k = 0; k < 3; ++k) out[sz(i * 3 + k)] = c[k];
    }
    return out;
}

bool point_visible(double px, double py, double depth, const SplatPlan &plan, float tau) {
    if (!std::isfinite(px) || !std::isfinite(py) || !(depth > 0.0)) return false;
    if (px < 0.0 || py < 0.0 || px >= plan.width || py >= plan.height) return false;
    const auto pix = sz(static_cast<std::int64_t>(std::floor(py)) * plan.width + static_cast<std::int64_t>(std::floor(px)));
    const float zb = plan.zbuffer[pix];
    return std::isfinite(zb) && std::fabs(depth - zb) <= static_cast<double>(tau) * depth;
}

SplatPlan plan_splats(std::span<const float> ndc_positions, const NdcRecord &record, const CameraSpec &camera,
                      const RasterConfig &cfg) {
    check_config(cfg);
    const auto n = point_count(ndc_positions);
    SplatPlan plan;
    init_plan(plan, camera, n);
    const int w = camera.width, h = camera.height;
    const std::int64_t pixels = static_cast<std::int64_t>(w) * h;

    // Projection and footprints, in parallel over points.
    std::vector<std::array<FootprintTap, 4>> taps(sz(n));
    std::vector<double> zs(sz(n), -1.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto c = camera_point(ndc_positions, i, record, camera);
        if (!(c.z() > 0.0)) continue;
        const auto px = camera.project_camera(c);
        zs[sz(i)] = c.z();
        plan.depth[sz(i)] = static_cast<float>(c.z());
        plan.pixel_xy[sz(i * 2)] = static_cast<float>(px.x());
        plan.pixel_xy[sz(i * 2 + 1)] = static_cast<float>(px.y());
        taps[sz(i)] = bilinear_footprint(px.x(), px.y());
    }

    // Bucket contributions per pixel in point order (counting sort).
    std::vector<std::int64_t> start(sz(pixels + 1), 0);
    auto usable = [&](const FootprintTap &t) { return t.weight >= kMinTapWeight && t.x >= 0 && t.y >= 0 && t.x < w && t.y < h; };
    for (std::int64_t i = 0; i < n; ++i) {
        if (zs[sz(i)] <= 0.0) {
            ++plan.behind_camera;
            continue;
        }
        for (const auto &t : taps[sz(i)]) {
            if (usable(t)) ++start[sz(static_cast<std::int64_t>(t.y) * w + t.x + 1)];
        }
    }
    for (std::int64_t p = 0; p < pixels; ++p) start[sz(p + 1)] += start[sz(p)];
    std::vector<std::int64_t> fill(start.begin(), start.end() - 1);
    std::vector<std::int64_t> who(sz(start.back()));
    std::vector<float> bil(sz(start.back()));
    for (std::int64_t i = 0; i < n; ++i) {
        if (zs[sz(i)] <= 0.0) continue;
        for (const auto &t : taps[sz(i)]) {
            if (!usable(t)) continue;
            const auto slot = sz(fill[sz(static_cast<std::int64_t>(t.y) * w + t.x)]++);
            who[slot] = i;
            bil[slot] = t.weight;
        }
    }

    // z_min and normalized weights, in parallel over pixels.
    plan.map.rows = pixels;
    plan.map.offsets = start;
    plan.map.index = who;
    plan.map.weight.assign(who.size(), 0.0f);
    const double lambda = cfg.lambda, far = record.far;
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t p = 0; p < pixels; ++p) {
        const auto b = sz(start[sz(p)]), e = sz(start[sz(p + 1)]);
        if (b == e) continue;
        double zmin = std::numeric_limits<double>::infinity();
        for (auto s = b; s < e; ++s) zmin = std::min(zmin, zs[sz(who[s])]);
        double total = 0.0;
        for (auto s = b; s < e; ++s) total += soft_z(bil[s], zs[sz(who[s])], zmin, lambda, far);
        for (auto s = b; s < e; ++s) {
            plan.map.weight[s] = static_cast<float>(soft_z(bil[s], zs[sz(who[s])], zmin, lambda, far) / total);
        }
        plan.zbuffer[sz(p)] = static_cast<float>(zmin);
        plan.coverage[sz(p)] = 1;
    }

#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        plan.visible[sz(i)] = point_visible(plan.pixel_xy[sz(i * 2)], plan.pixel_xy[sz(i * 2 + 1)], zs[sz(i)], plan,
                                            cfg.tau);
    }
    return plan;
}

Tensor rasterize(const Tensor &features, const SplatPlan &plan) {
    if (features.dim() != 2 || features.size(0) != plan.points()) {
        throw ShapeError("rasterize: features " + shape_str(features.shape()) + " for a plan over " +
                         std::to_string(plan.points()) + " points");
    }
    const auto c = features.size(1);
    return ops::sparse_mix(features, plan.map, c, kernels::Layout::ItemMajor, kernels::Layout::ChannelMajor,
                           {c, plan.height, plan.width});
}

namespace reference {

SplatPlan plan_splats(std::span<const float> ndc_positions, const NdcRecord &record, const CameraSpec &camera,
                      const RasterConfig &cfg) {
    check_config(cfg);
    const auto n = point_count(ndc_positions);
    SplatPlan plan;
    init_plan(plan, camera, n);
    const int w = camera.width, h = camera.height;
    const std::int64_t pixels = static_cast<std::int64_t>(w) * h;

    struct Hit {
        std::int64_t point;
        float bil;
        double z;
    };
    std::vector<std::vector<Hit>> hits(sz(pixels));
    std::vector<double> zmin(sz(pixels), std::numeric_limits<double>::infinity());
    std::vector<double> zs(sz(n), -1.0);
    for (std::int64_t i = 0; i < n; ++i) {
        const auto c = camera_point(ndc_positions, i, record, camera);
        if (!(c.z() > 0.0)) {
            ++plan.behind_camera;
            continue;
        }
        const auto px = camera.project_camera(c);
        zs[sz(i)] = c.z();
        plan.depth[sz(i)] = static_cast<float>(c.z());
        plan.pixel_xy[sz(i * 2)] = static_cast<float>(px.x());
        plan.pixel_xy[sz(i * 2 + 1)] = static_cast<float>(px.y());
        for (const auto &t : bilinear_footprint(px.x(), px.y())) {
            if (t.weight < kMinTapWeight || t.x < 0 || t.y < 0 || t.x >= w || t.y >= h) continue;
            const auto p = sz(static_cast<std::int64_t>(t.y) * w + t.x);
            hits[p].push_back({i, t.weight, c.z()});
            zmin[p] = std::min(zmin[p], c.z());
        }
    }
    for (std::int64_t p = 0; p < pixels; ++p) {
        const auto &hp = hits[sz(p)];
        if (!hp.empty()) {
            double total = 0.0;
            for (const auto &x : hp) total += soft_z(x.bil, x.z, zmin[sz(p)], cfg.lambda, record.far);
            for (const auto &x : hp) {
                plan.map.push(x.point, static_cast<float>(soft_z(x.bil, x.z, zmin[sz(p)], cfg.lambda, record.far) / total));
            }
            plan.zbuffer[sz(p)] = static_cast<float>(zmin[sz(p)]);
            plan.coverage[sz(p)] = 1;
        }
        plan.map.end_row();
    }
    for (std::int64_t i = 0; i < n; ++i) {
        plan.visible[sz(i)] = point_visible(plan.pixel_xy[sz(i * 2)], plan.pixel_xy[sz(i * 2 + 1)], zs[sz(i)], plan,
                                            cfg.tau);
    }
    return plan;
}

} // namespace reference

} // namespace stylepoint::render
