// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/train/scene.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace stylepoint::train {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Rng {
    std::mt19937_64 gen;
    double operator()(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
};

Texture random_texture(Rng &u) {
    Texture t;
    for (int c = 0; c < 3; ++c) {
        t.base[c] = static_cast<float>(u(0.15, 0.85));
        t.amplitude[c] = static_cast<float>(u(0.05, 0.2));
        t.freq[c] = Eigen::Vector3f(static_cast<float>(u(-2.5, 2.5)), static_cast<float>(u(-2.5, 2.5)),
                                    static_cast<float>(u(-2.5, 2.5)));
        t.phase[c] = static_cast<float>(u(0.0, 2.0 * std::numbers::pi));
    }
    return t;
}

Box make_box(Eigen::Vector3d lo, Eigen::Vector3d hi, Rng &u, bool inside = false) {
    return Box{lo, hi, random_texture(u), inside};
}

Box back_wall(Rng &u) { return make_box({-9, -9, 6.0}, {9, 9, 6.5}, u); }

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    int axis = -1;
    const Box *box = nullptr;
};

// Slab test; returns the visible surface distance along the ray, if any.
void intersect(const Box &b, const Eigen::Vector3d &o, const Eigen::Vector3d &d, Hit &best) {
    double tn = -std::numeric_limits<double>::infinity(), tf = std::numeric_limits<double>::infinity();
    int an = -1, af = -1;
    for (int k = 0; k < 3; ++k) {
        if (std::fabs(d[k]) < 1e-12) {
            if (o[k] < b.lo[k] || o[k] > b.hi[k]) return;
            continue;
        }
        double t0 = (b.lo[k] - o[k]) / d[k], t1 = (b.hi[k] - o[k]) / d[k];
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > tn) {
            tn = t0;
            an = k;
        }
        if (t1 < tf) {
            tf = t1;
            af = k;
        }
    }
    if (tn > tf) return;
    double t = 0.0;
    int axis = -1;
    if (b.inside) {
        if (!(tn <= 0.0 && tf > 0.0)) return;
        t = tf;
        axis = af;
    } else {
        if (!(tn > 1e-9)) return;
        t = tn;
        axis = an;
    }
    if (t < best.t) best = Hit{t, axis, &b};
}

} // namespace

SceneKind parse_scene_kind(const std::string &name) {
    if (name == "boxes") return SceneKind::Boxes;
    if (name == "planes") return SceneKind::Planes;
    if (name == "room") return SceneKind::Room;
    throw std::invalid_argument("unknown scene kind '" + name + "' (expected boxes, planes or room)");
}

std::string to_string(SceneKind kind) {
    switch (kind) {
    case SceneKind::Boxes: return "boxes";
    case SceneKind::Planes: return "planes";
    case SceneKind::Room: return "room";
    }
    return "?";
}

std::array<float, 3> Texture::color(const Eigen::Vector3d &p, int face_axis) const {
    static constexpr float shade[3] = {0.85f, 1.0f, 0.93f};
    const Eigen::Vector3f pf = p.cast<float>();
    std::array<float, 3> out{};
    for (int c = 0; c < 3; ++c) {
        const float v = base[c] + amplitude[c] * std::sin(freq[c].dot(pf) + phase[c]);
        out[c] = std::clamp(v * shade[face_axis], 0.0f, 1.0f);
    }
    return out;
}

SyntheticScene SyntheticScene::generate(SceneKind kind, std::uint64_t seed, int width, int height) {
    SyntheticScene s;
    s.kind = kind;
    s.seed = seed;
    s.canonical = make_camera(width, height, 60.0);
    Rng u{std::mt19937_64(seed * 3 + static_cast<std::uint64_t>(kind))};
    switch (kind) {
    case SceneKind::Boxes: {
        s.boxes.push_back(back_wall(u));
        s.boxes.push_back(make_box({-9, 1.2, -2}, {9, 1.6, 6.5}, u));
        for (int i = 0; i < 3; ++i) {
            const double sx = u(0.5, 1.1), sy = u(0.5, 1.2), sz = u(0.5, 1.0);
            const double cx = u(-1.3, 1.3), cz = u(2.6, 4.5);
            s.boxes.push_back(make_box({cx - sx / 2, 1.2 - sy, cz - sz / 2}, {cx + sx / 2, 1.2, cz + sz / 2}, u));
        }
        break;
    }
    case SceneKind::Planes: {
        s.boxes.push_back(back_wall(u));
        for (int i = 0; i < 3; ++i) {
            const double w = u(1.2, 2.2), h = u(1.0, 2.0);
            const double cx = u(-1.5, 1.5), cy = u(-0.8, 0.8), z = u(2.2, 5.0);
            s.boxes.push_back(make_box({cx - w / 2, cy - h / 2, z}, {cx + w / 2, cy + h / 2, z + 0.05}, u));
        }
        break;
    }
    case SceneKind::Room: {
        s.boxes.push_back(make_box({-2.6, -1.6, -1.0}, {2.6, 1.4, 6.0}, u, true));
        for (int i = 0; i < 2; ++i) {
            const double sx = u(0.6, 1.2), sy = u(0.5, 1.3), sz = u(0.5, 1.0);
            const double cx = u(-1.4, 1.4), cz = u(2.8, 4.8);
            s.boxes.push_back(make_box({cx - sx / 2, 1.4 - sy, cz - sz / 2}, {cx + sx / 2, 1.4, cz + sz / 2}, u));
        }
        break;
    }
    }
    return s;
}

SceneRender SyntheticScene::render(const CameraSpec &camera) const {
    camera.validate();
    SceneRender r{RgbImage(camera.width, camera.height), DepthRaster(camera.width, camera.height, NAN)};
    const Eigen::Vector3d origin = camera.center();
    const Eigen::Matrix3d to_world = camera.rotation.transpose();
#pragma omp parallel for schedule(static)
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            // z-component 1 in camera space, so the ray parameter is z-depth
            const Eigen::Vector3d d = to_world * camera.unproject(x + 0.5, y + 0.5, 1.0);
            Hit best;
            for (const auto &b : boxes) intersect(b, origin, d, best);
            if (!best.box) continue;
            const auto rgb = best.box->texture.color(origin + best.t * d, best.axis);
            for (int c = 0; c < 3; ++c) r.image.at(x, y, c) = rgb[c];
            r.depth.depth[static_cast<std::size_t>(y) * camera.width + x] = static_cast<float>(best.t);
        }
    }
    return r;
}

ScenePointCloud SyntheticScene::point_cloud() const {
    const auto r = render(canonical);
    const auto pts = back_project(r.image, r.depth, canonical);
    const auto [near, far] = depth_bounds(pts, canonical);
    return normalize_ndc(pts, canonical, near, far);
}

CameraSpec offset_camera(const CameraSpec &canonical, const Eigen::Vector3d &translation,
                         const Eigen::Vector3d &euler_deg) {
    const Eigen::Matrix3d delta = (Eigen::AngleAxisd(euler_deg[2] * kDeg, Eigen::Vector3d::UnitZ()) *
                                   Eigen::AngleAxisd(euler_deg[1] * kDeg, Eigen::Vector3d::UnitX()) *
                                   Eigen::AngleAxisd(euler_deg[0] * kDeg, Eigen::Vector3d::UnitY()))
                                      .toRotationMatrix();
    CameraSpec cam = canonical;
    cam.rotation = delta * canonical.rotation;
    const Eigen::Vector3d center = canonical.center() + translation;
    cam.translation = -cam.rotation * center;
    return cam;
}

CameraSpec sample_view(const CameraSpec &canonical, const PoseRanges &ranges, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::Vector3d t, e;
    for (int k = 0; k < 3; ++k) t[k] = unit(rng) * ranges.translation;
    for (int k = 0; k < 3; ++k) e[k] = unit(rng) * ranges.rotation_deg;
    return offset_camera(canonical, t, e);
}

PoseOffset pose_offset(const CameraSpec &canonical, const CameraSpec &camera) {
    const Eigen::Matrix3d m = camera.rotation * canonical.rotation.transpose();
    // m = Rz(roll) Rx(pitch) Ry(yaw)
    PoseOffset o;
    o.translation = camera.center() - canonical.center();
    o.euler_deg = Eigen::Vector3d(std::atan2(-m(2, 0), m(2, 2)), std::asin(std::clamp(m(2, 1), -1.0, 1.0)),
                                  std::atan2(-m(0, 1), m(1, 1))) /
                  kDeg;
    return o;
}

} // namespace stylepoint::train
