// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/geometry/point_cloud.hpp"

#include "stylepoint/binary_io.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace stylepoint {

namespace {

// Slack for coordinates that leave the cube only through rounding.
constexpr double kNdcSlack = 1e-6;

void check_dims(const RgbImage &image, int width, int height) {
    if (image.width != width || image.height != height) {
        throw GeometryError("image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                            " but depth is " + std::to_string(width) + "x" + std::to_string(height));
    }
}

void push_point(ColoredPoints &out, const CameraSpec &cam, int u, int v, double z, const float *rgb) {
    const Eigen::Vector3d world = cam.to_world(cam.unproject(u + 0.5, v + 0.5, z));
    out.xyz.insert(out.xyz.end(), {static_cast<float>(world.x()), static_cast<float>(world.y()),
                                   static_cast<float>(world.z())});
    out.rgb.insert(out.rgb.end(), rgb, rgb + 3);
    out.source_pixel.push_back(static_cast<std::int64_t>(v) * cam.width + u);
}

double to_ndc_z(double z, double near, double far) {
    return 2.0 * ((1.0 / z - 1.0 / far) / (1.0 / near - 1.0 / far)) - 1.0;
}

} // namespace

std::size_t DepthRaster::valid_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        n += valid(i) ? 1 : 0;
    }
    return n;
}

void LayeredDepthRaster::validate() const {
    if (pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw GeometryError("LDI pixel count does not match its size");
    }
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        float prev = 0.0f;
        for (const auto &layer : pixels[i]) {
            if (!std::isfinite(layer.depth) || !(layer.depth > prev)) {
                throw GeometryError("LDI pixel " + std::to_string(i) + " has non-increasing or invalid depths");
            }
            prev = layer.depth;
        }
    }
}

std::size_t LayeredDepthRaster::layer_count() const {
    std::size_t n = 0;
    for (const auto &p : pixels) {
        n += p.size();
    }
    return n;
}

void ColoredPoints::append(const ColoredPoints &other) {
    xyz.insert(xyz.end(), other.xyz.begin(), other.xyz.end());
    rgb.insert(rgb.end(), other.rgb.begin(), other.rgb.end());
    source_pixel.insert(source_pixel.end(), other.source_pixel.begin(), other.source_pixel.end());
}

ColoredPoints back_project(const RgbImage &image, const DepthRaster &depth, const CameraSpec &cam) {
    check_dims(image, depth.width, depth.height);
    if (cam.width != depth.width || cam.height != depth.height) {
        throw GeometryError("camera resolution does not match the depth raster");
    }
    ColoredPoints out;
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            const auto i = static_cast<std::size_t>(v) * depth.width + u;
            if (depth.valid(i)) {
                push_point(out, cam, u, v, depth.depth[i], &image.rgb[i * 3]);
            }
        }
    }
    if (out.size() == 0) {
        throw GeometryError("depth raster has no valid pixels");
    }
    return out;
}

ColoredPoints back_project(const RgbImage &image, const LayeredDepthRaster &ldi, const CameraSpec &cam) {
    check_dims(image, ldi.width, ldi.height);
    ldi.validate();
    ColoredPoints out;
    for (int v = 0; v < ldi.height; ++v) {
        for (int u = 0; u < ldi.width; ++u) {
            const auto i = static_cast<std::size_t>(v) * ldi.width + u;
            for (const auto &layer : ldi.pixels[i]) {
                const float rgb[3] = {layer.rgb[0] / 255.0f, layer.rgb[1] / 255.0f, layer.rgb[2] / 255.0f};
                push_point(out, cam, u, v, layer.depth, rgb);
            }
        }
    }
    if (out.size() == 0) {
        throw GeometryError("layered depth image has no layers");
    }
    return out;
}

ScenePointCloud normalize_ndc(const ColoredPoints &points, const CameraSpec &anchor, double near, double far) {
    if (!(near > 0.0) || !(near < far)) {
        throw GeometryError("normalize_ndc needs 0 < near < far");
    }
    anchor.validate();
    ScenePointCloud cloud;
    cloud.record = NdcRecord{near, far, anchor};
    cloud.positions.resize(points.xyz.size());
    cloud.colors = points.rgb;
    cloud.source_pixel = points.source_pixel;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Eigen::Vector3d world(points.xyz[i * 3], points.xyz[i * 3 + 1], points.xyz[i * 3 + 2]);
        const Eigen::Vector3d c = anchor.to_camera(world);
        if (!(c.z() > 0.0)) {
            throw GeometryError("point " + std::to_string(i) + " is at or behind the anchor camera plane");
        }
        const Eigen::Vector2d px = anchor.project_camera(c);
        const double ndc[3] = {2.0 * px.x() / anchor.width - 1.0, 2.0 * px.y() / anchor.height - 1.0,
                               to_ndc_z(c.z(), near, far)};
        for (int k = 0; k < 3; ++k) {
            if (std::fabs(ndc[k]) > 1.0 + kNdcSlack) {
                throw GeometryError("point " + std::to_string(i) + " falls outside the NDC cube (axis " +
                                    std::to_string(k) + " = " + std::to_string(ndc[k]) + ")");
            }
            cloud.positions[i * 3 + static_cast<std::size_t>(k)] =
                std::clamp(static_cast<float>(ndc[k]), -1.0f, 1.0f);
        }
    }
    return cloud;
}

Eigen::Vector3d denormalize(const Eigen::Vector3d &ndc, const NdcRecord &record) {
    if (!(ndc.z() >= -1.0 && ndc.z() <= 1.0)) {
        throw GeometryError("z_ndc " + std::to_string(ndc.z()) + " outside [-1, 1]");
    }
    const double inv_near = 1.0 / record.near, inv_far = 1.0 / record.far;
    const double inv_z = 0.5 * (ndc.z() + 1.0) * (inv_near - inv_far) + inv_far;
    const double z = 1.0 / inv_z;
    const auto &a = record.anchor;
    const double px = 0.5 * (ndc.x() + 1.0) * a.width;
    const double py = 0.5 * (ndc.y() + 1.0) * a.height;
    return a.to_world(a.unproject(px, py, z));
}

std::pair<double, double> depth_bounds(const ColoredPoints &points, const CameraSpec &anchor) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Eigen::Vector3d c =
            anchor.to_camera(Eigen::Vector3d(points.xyz[i * 3], points.xyz[i * 3 + 1], points.xyz[i * 3 + 2]));
        if (c.z() > 0.0) {
            lo = std::min(lo, c.z());
            hi = std::max(hi, c.z());
        }
    }
    if (!(hi > 0.0)) {
        throw GeometryError("no points in front of the anchor camera");
    }
    return {0.95 * lo, 1.05 * hi};
}

ScenePointCloud merge_views(const std::vector<ViewInput> &views, std::size_t center_index, MergeReport *report) {
    if (views.empty() || center_index >= views.size()) {
        throw GeometryError("merge_views needs at least one view and a valid center index");
    }
    MergeReport local;
    MergeReport &rep = report ? *report : local;
    const CameraSpec &anchor = views[center_index].camera;
    ColoredPoints all;
    for (std::size_t v = 0; v < views.size(); ++v) {
        if (views[v].depth.valid_count() == 0) {
            rep.warnings.push_back("view " + std::to_string(v) + " has no valid depth; skipped");
            continue;
        }
        all.append(back_project(views[v].image, views[v].depth, views[v].camera));
    }
    if (all.size() == 0) {
        throw GeometryError("every view has empty depth");
    }
    // Keep only what the anchor camera can see; side views may reach beyond
    // its frustum.
    ColoredPoints kept;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const Eigen::Vector3d c =
            anchor.to_camera(Eigen::Vector3d(all.xyz[i * 3], all.xyz[i * 3 + 1], all.xyz[i * 3 + 2]));
        if (!(c.z() > 0.0) || !anchor.contains(anchor.project_camera(c))) {
            ++rep.dropped_outside_anchor;
            continue;
        }
        kept.xyz.insert(kept.xyz.end(), all.xyz.begin() + static_cast<std::ptrdiff_t>(i * 3),
                        all.xyz.begin() + static_cast<std::ptrdiff_t>(i * 3 + 3));
        kept.rgb.insert(kept.rgb.end(), all.rgb.begin() + static_cast<std::ptrdiff_t>(i * 3),
                        all.rgb.begin() + static_cast<std::ptrdiff_t>(i * 3 + 3));
        kept.source_pixel.push_back(all.source_pixel[i]);
    }
    if (kept.size() == 0) {
        throw GeometryError("no merged point falls inside the anchor view");
    }
    const auto [near, far] = depth_bounds(kept, anchor);
    return normalize_ndc(kept, anchor, near, far);
}

void write_depth(const std::filesystem::path &path, const DepthRaster &depth) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw GeometryError("cannot open " + path.string() + " for writing");
    }
    binary::put_magic(os, kDepthMagic);
    binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(depth.width));
    binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(depth.height));
    for (float d : depth.depth) {
        binary::put<float>(os, std::isfinite(d) && d > 0.0f ? d : std::numeric_limits<float>::quiet_NaN());
    }
}

DepthRaster read_depth(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw GeometryError("cannot open depth file " + path.string());
    }
    if (!binary::check_magic(is, kDepthMagic)) {
        throw GeometryError(path.string() + " is not a DPTH depth raster (bad magic)");
    }
    DepthRaster d;
    d.width = static_cast<int>(binary::get<std::uint32_t>(is, "depth width"));
    d.height = static_cast<int>(binary::get<std::uint32_t>(is, "depth height"));
    d.depth.resize(static_cast<std::size_t>(d.width) * d.height);
    for (auto &v : d.depth) {
        v = binary::get<float>(is, "depth value");
    }
    return d;
}

void write_ldi(const std::filesystem::path &path, const LayeredDepthRaster &ldi) {
    ldi.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw GeometryError("cannot open " + path.string() + " for writing");
    }
    binary::put_magic(os, kLdiMagic);
    binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(ldi.width));
    binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(ldi.height));
    for (const auto &px : ldi.pixels) {
        if (px.size() > 255) {
            throw GeometryError("LDI pixel has more than 255 layers");
        }
        binary::put<std::uint8_t>(os, static_cast<std::uint8_t>(px.size()));
        for (const auto &layer : px) {
            binary::put<float>(os, layer.depth);
            for (auto c : layer.rgb) {
                binary::put<std::uint8_t>(os, c);
            }
        }
    }
}

LayeredDepthRaster read_ldi(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw GeometryError("cannot open LDI file " + path.string());
    }
    if (!binary::check_magic(is, kLdiMagic)) {
        throw GeometryError(path.string() + " is not an LDI0 file (bad magic)");
    }
    LayeredDepthRaster ldi;
    ldi.width = static_cast<int>(binary::get<std::uint32_t>(is, "LDI width"));
    ldi.height = static_cast<int>(binary::get<std::uint32_t>(is, "LDI height"));
    ldi.pixels.resize(static_cast<std::size_t>(ldi.width) * ldi.height);
    for (auto &px : ldi.pixels) {
        px.resize(binary::get<std::uint8_t>(is, "layer count"));
        for (auto &layer : px) {
            layer.depth = binary::get<float>(is, "layer depth");
            for (auto &c : layer.rgb) {
                c = binary::get<std::uint8_t>(is, "layer color");
            }
        }
    }
    ldi.validate();
    return ldi;
}

void write_ply(const std::filesystem::path &path, std::span<const float> xyz, std::span<const float> rgb) {
    if (xyz.size() != rgb.size() || xyz.size() % 3 != 0) {
        throw GeometryError("PLY export needs matching N x 3 positions and colors");
    }
    std::ofstream os(path);
    if (!os) {
        throw GeometryError("cannot open " + path.string() + " for writing");
    }
    const std::size_t n = xyz.size() / 3;
    os << "ply\nformat ascii 1.0\nelement vertex " << n
       << "\nproperty float x\nproperty float y\nproperty float z\n"
          "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    os.precision(9);
    for (std::size_t i = 0; i < n; ++i) {
        os << xyz[i * 3] << ' ' << xyz[i * 3 + 1] << ' ' << xyz[i * 3 + 2] << ' ' << int(to_byte(rgb[i * 3])) << ' '
           << int(to_byte(rgb[i * 3 + 1])) << ' ' << int(to_byte(rgb[i * 3 + 2])) << '\n';
    }
}

} // namespace stylepoint
