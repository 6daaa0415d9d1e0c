// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <array>
#include <stdexcept>

namespace stylepoint {

class CameraError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Pinhole camera with a world->camera rigid pose.
///
/// Image coordinates are continuous with pixel (u, v) covering
/// [u, u+1) x [v, v+1); its center sits at (u + 0.5, v + 0.5). The camera looks
/// down +Z, x right, y down.
struct CameraSpec {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.5;
    double cy = 0.5;
    int width = 1;
    int height = 1;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();   // world -> camera

    /// Throws CameraError when intrinsics or the rotation are invalid.
    void validate() const;

    Eigen::Vector3d to_camera(const Eigen::Vector3d &world) const { return rotation * world + translation; }
    Eigen::Vector3d to_world(const Eigen::Vector3d &cam) const { return rotation.transpose() * (cam - translation); }
    Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

    /// Continuous image coordinates of a camera-space point (Z must be > 0).
    Eigen::Vector2d project_camera(const Eigen::Vector3d &cam) const {
        return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy};
    }
    /// Camera-space point at depth z (along the optical axis) behind image
    /// coordinate (x, y).
    Eigen::Vector3d unproject(double x, double y, double z) const {
        return {z * (x - cx) / fx, z * (y - cy) / fy, z};
    }

    bool contains(const Eigen::Vector2d &px) const {
        return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < width && px.y() < height;
    }

    /// Row-major 3x4 [R | t].
    std::array<double, 12> pose_matrix() const;
    void set_pose_matrix(const std::array<double, 12> &m);

    /// Same intrinsics scaled to another resolution.
    CameraSpec resized(int new_width, int new_height) const;
};

/// Camera looking from `eye` toward `target` with the given up hint.
Eigen::Matrix3d look_at_rotation(const Eigen::Vector3d &eye, const Eigen::Vector3d &target,
                                 const Eigen::Vector3d &up = Eigen::Vector3d(0, -1, 0));

/// Pinhole intrinsics with a symmetric horizontal field of view.
CameraSpec make_camera(int width, int height, double horizontal_fov_deg);

} // namespace stylepoint
