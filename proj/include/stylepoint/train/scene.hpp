// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/geometry/point_cloud.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace stylepoint::train {

enum class SceneKind { Boxes, Planes, Room };

/// Throws std::invalid_argument naming the accepted kinds.
SceneKind parse_scene_kind(const std::string &name);
std::string to_string(SceneKind kind);

/// Smooth procedural color: base + amplitude * sin(freq . p + phase) per
/// channel, then a per-face shade.
struct Texture {
    std::array<float, 3> base{0.5f, 0.5f, 0.5f};
    std::array<float, 3> amplitude{0.0f, 0.0f, 0.0f};
    std::array<Eigen::Vector3f, 3> freq{Eigen::Vector3f::Zero(), Eigen::Vector3f::Zero(), Eigen::Vector3f::Zero()};
    std::array<float, 3> phase{0.0f, 0.0f, 0.0f};

    std::array<float, 3> color(const Eigen::Vector3d &p, int face_axis) const;
};

/// Axis-aligned box in world space. An `inside` box is seen from within
/// (its interior faces are the walls of a room).
struct Box {
    Eigen::Vector3d lo = Eigen::Vector3d::Zero();
    Eigen::Vector3d hi = Eigen::Vector3d::Ones();
    Texture texture;
    bool inside = false;
};

struct SceneRender {
    RgbImage image;
    DepthRaster depth;
};

/// Analytic scene of textured boxes, ray cast through pixel centers. World
/// coordinates are those of the canonical camera (x right, y down, z
/// forward from the origin).
struct SyntheticScene {
    SceneKind kind = SceneKind::Boxes;
    std::uint64_t seed = 0;
    std::vector<Box> boxes;
    CameraSpec canonical;

    static SyntheticScene generate(SceneKind kind, std::uint64_t seed, int width = 64, int height = 64);

    /// Ground-truth color and z-depth for `camera`. Every pixel hits geometry
    /// for poses near the canonical one.
    SceneRender render(const CameraSpec &camera) const;

    /// Canonical render back-projected into the canonical camera's NDC.
    ScenePointCloud point_cloud() const;
};

struct PoseRanges {
    double translation = 0.15; // per axis, scene units
    double rotation_deg = 10.0; // per axis (yaw, pitch, roll)
};

/// Camera with the canonical intrinsics and a pose drawn uniformly within
/// `ranges` of the canonical one: the center moves by up to `translation`
/// per axis and the orientation turns by up to `rotation_deg` about each
/// camera axis.
CameraSpec sample_view(const CameraSpec &canonical, const PoseRanges &ranges, std::mt19937_64 &rng);

/// Offsets of `camera` from `canonical`: center displacement and the
/// rotation angle of R * R0^T, in degrees.
struct PoseOffset {
    Eigen::Vector3d translation;
    Eigen::Vector3d euler_deg; // yaw, pitch, roll of the relative rotation
};
PoseOffset pose_offset(const CameraSpec &canonical, const CameraSpec &camera);

/// Same pose composition as sample_view with explicit offsets.
CameraSpec offset_camera(const CameraSpec &canonical, const Eigen::Vector3d &translation,
                         const Eigen::Vector3d &euler_deg);

} // namespace stylepoint::train
