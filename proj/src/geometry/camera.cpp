// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/geometry/camera.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <string>

namespace stylepoint {

void CameraSpec::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw CameraError("focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
        throw CameraError("image size must be positive");
    }
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
        throw CameraError("principal point (" + std::to_string(cx) + ", " + std::to_string(cy) +
                          ") outside the image");
    }
    const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= 1e-5) || rotation.determinant() < 0.0) {
        throw CameraError("pose rotation is not orthonormal (deviation " + std::to_string(ortho) + ")");
    }
    if (!translation.allFinite()) {
        throw CameraError("pose translation is not finite");
    }
}

std::array<double, 12> CameraSpec::pose_matrix() const {
    std::array<double, 12> m{};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            m[static_cast<std::size_t>(r * 4 + c)] = rotation(r, c);
        }
        m[static_cast<std::size_t>(r * 4 + 3)] = translation(r);
    }
    return m;
}

void CameraSpec::set_pose_matrix(const std::array<double, 12> &m) {
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            rotation(r, c) = m[static_cast<std::size_t>(r * 4 + c)];
        }
        translation(r) = m[static_cast<std::size_t>(r * 4 + 3)];
    }
}

CameraSpec CameraSpec::resized(int new_width, int new_height) const {
    CameraSpec out = *this;
    const double sx = static_cast<double>(new_width) / width;
    const double sy = static_cast<double>(new_height) / height;
    out.fx *= sx;
    out.cx *= sx;
    out.fy *= sy;
    out.cy *= sy;
    out.width = new_width;
    out.height = new_height;
    return out;
}

Eigen::Matrix3d look_at_rotation(const Eigen::Vector3d &eye, const Eigen::Vector3d &target,
                                 const Eigen::Vector3d &up) {
    const Eigen::Vector3d z = (target - eye).normalized();
    Eigen::Vector3d x = z.cross(up);
    if (x.norm() < 1e-9) {
        x = Eigen::Vector3d::UnitX();
    }
    x.normalize();
    const Eigen::Vector3d y = z.cross(x);
    Eigen::Matrix3d r;
    r.row(0) = x.transpose();
    r.row(1) = y.transpose();
    r.row(2) = z.transpose();
    return r;
}

CameraSpec make_camera(int width, int height, double horizontal_fov_deg) {
    CameraSpec cam;
    cam.width = width;
    cam.height = height;
    cam.fx = 0.5 * width / std::tan(0.5 * horizontal_fov_deg * std::numbers::pi / 180.0);
    cam.fy = cam.fx;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    return cam;
}

} // namespace stylepoint
