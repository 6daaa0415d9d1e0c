// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/geometry/point_cloud.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

namespace sp = stylepoint;

namespace {

sp::CameraSpec test_camera() {
    sp::CameraSpec c;
    c.fx = 50.0;
    c.fy = 55.0;
    c.cx = 16.5;
    c.cy = 12.5;
    c.width = 32;
    c.height = 24;
    return c;
}

sp::CameraSpec posed_camera(double yaw_deg, Eigen::Vector3d t) {
    auto c = test_camera();
    c.rotation = Eigen::AngleAxisd(yaw_deg * M_PI / 180.0, Eigen::Vector3d::UnitY()).toRotationMatrix();
    c.translation = t;
    return c;
}

std::filesystem::path tmp(const std::string &name) {
    return std::filesystem::temp_directory_path() / ("stylepoint_geom_" + name);
}

} // namespace

TEST(Camera, ValidateRejectsBadIntrinsics) {
    auto c = test_camera();
    EXPECT_NO_THROW(c.validate());
    c.fx = 0;
    EXPECT_THROW(c.validate(), sp::CameraError);
    c = test_camera();
    c.cx = 32;
    EXPECT_THROW(c.validate(), sp::CameraError);
    c = test_camera();
    c.rotation(0, 1) = 0.01;
    EXPECT_THROW(c.validate(), sp::CameraError);
}

TEST(Camera, PrincipalPointRay) {
    // Pixel whose center is the principal point, identity pose.
    const auto c = test_camera();
    sp::RgbImage img(32, 24, 0.5f);
    sp::DepthRaster d(32, 24, std::nanf(""));
    d.depth[12 * 32 + 16] = 3.0f;
    const auto pts = sp::back_project(img, d, c);
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_FLOAT_EQ(pts.xyz[0], 0.0f);
    EXPECT_FLOAT_EQ(pts.xyz[1], 0.0f);
    EXPECT_FLOAT_EQ(pts.xyz[2], 3.0f);
    EXPECT_EQ(pts.source_pixel[0], 12 * 32 + 16);
}

TEST(Camera, ProjectionRoundTrip) {
    const auto c = posed_camera(7.0, {0.1, -0.2, 0.3});
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> ux(0, 32), uy(0, 24), uz(0.5, 20);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
        const Eigen::Vector2d px(ux(rng), uy(rng));
        const Eigen::Vector3d w = c.to_world(c.unproject(px.x(), px.y(), uz(rng)));
        worst = std::max(worst, (c.project_camera(c.to_camera(w)) - px).norm());
    }
    EXPECT_LE(worst, 1e-4);
}

TEST(Camera, TwoByTwoHandRays) {
    sp::CameraSpec c;
    c.fx = 2.0;
    c.fy = 4.0;
    c.cx = 1.0;
    c.cy = 1.0;
    c.width = 2;
    c.height = 2;
    sp::RgbImage img(2, 2, 0.0f);
    sp::DepthRaster d(2, 2, 1.0f);
    const auto pts = sp::back_project(img, d, c);
    ASSERT_EQ(pts.size(), 4u);
    // Pixel centers at 0.5 and 1.5, so offsets from the principal point are
    // -0.5 and +0.5: x = +-0.25, y = +-0.125.
    const float want[4][3] = {{-0.25f, -0.125f, 1}, {0.25f, -0.125f, 1}, {-0.25f, 0.125f, 1}, {0.25f, 0.125f, 1}};
    for (int i = 0; i < 4; ++i) {
        for (int k = 0; k < 3; ++k) {
            EXPECT_FLOAT_EQ(pts.xyz[static_cast<std::size_t>(i * 3 + k)], want[i][k]);
        }
    }
}

TEST(Camera, BackProjectErrors) {
    const auto c = test_camera();
    sp::RgbImage img(32, 24);
    EXPECT_THROW(sp::back_project(img, sp::DepthRaster(16, 24, 1.0f), c), sp::GeometryError);
    EXPECT_THROW(sp::back_project(img, sp::DepthRaster(32, 24, -1.0f), c), sp::GeometryError);
}

TEST(Ndc, Endpoints) {
    const auto c = test_camera();
    sp::ColoredPoints p;
    p.xyz = {0, 0, 2, 0, 0, 8};
    p.rgb = {0, 0, 0, 0, 0, 0};
    p.source_pixel = {0, 1};
    const auto cloud = sp::normalize_ndc(p, c, 2.0, 8.0);
    EXPECT_NEAR(cloud.positions[0], 2 * 16.5 / 32 - 1, 1e-7);
    EXPECT_NEAR(cloud.positions[1], 2 * 12.5 / 24 - 1, 1e-7);
    EXPECT_FLOAT_EQ(cloud.positions[2], 1.0f);
    EXPECT_FLOAT_EQ(cloud.positions[5], -1.0f);
}

TEST(Ndc, HarmonicMidpointAndFarEnd) {
    sp::NdcRecord rec{2.0, 8.0, test_camera()};
    EXPECT_NEAR(sp::denormalize({0, 0, -1}, rec).z(), 8.0, 1e-12);
    EXPECT_NEAR(sp::denormalize({0, 0, 0}, rec).z(), 2.0 / (1.0 / 2.0 + 1.0 / 8.0), 1e-12);
    EXPECT_THROW(sp::denormalize({0, 0, 1.5}, rec), sp::GeometryError);
}

TEST(Ndc, EqualDepthPreservesImageXRatio) {
    const auto c = test_camera();
    sp::ColoredPoints p;
    p.xyz = {0.4f, 0, 3, -0.9f, 0.1f, 3};
    p.rgb.assign(6, 0.0f);
    p.source_pixel = {0, 1};
    const auto cloud = sp::normalize_ndc(p, c, 1.0, 10.0);
    // Inverting the affine pixel map recovers fx X / Z for each point.
    const double a = (cloud.positions[0] + 1) * 16.0 - c.cx;
    const double b = (cloud.positions[3] + 1) * 16.0 - c.cx;
    EXPECT_NEAR(a / b, 0.4 / -0.9, 1e-5);
}

TEST(Ndc, ContainmentAndRoundTrip) {
    const auto c = posed_camera(-12.0, {0.3, 0.1, -0.2});
    const double near = 0.7, far = 12.0;
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> ux(0, 32), uy(0, 24), uz(near, far);
    sp::ColoredPoints p;
    for (int i = 0; i < 10000; ++i) {
        const Eigen::Vector3d w = c.to_world(c.unproject(ux(rng), uy(rng), uz(rng)));
        p.xyz.insert(p.xyz.end(), {float(w.x()), float(w.y()), float(w.z())});
        p.rgb.insert(p.rgb.end(), {0, 0, 0});
        p.source_pixel.push_back(i);
    }
    const auto cloud = sp::normalize_ndc(p, c, near, far);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            ASSERT_GE(cloud.positions[i * 3 + k], -1.0f);
            ASSERT_LE(cloud.positions[i * 3 + k], 1.0f);
        }
        const Eigen::Vector3d w(p.xyz[i * 3], p.xyz[i * 3 + 1], p.xyz[i * 3 + 2]);
        const Eigen::Vector3d back = sp::denormalize(
            {cloud.positions[i * 3], cloud.positions[i * 3 + 1], cloud.positions[i * 3 + 2]}, cloud.record);
        worst = std::max(worst, (back - w).norm() / w.norm());
    }
    EXPECT_LE(worst, 1e-4);
}

TEST(Ndc, MonotoneAlongRay) {
    const auto c = test_camera();
    sp::ColoredPoints p;
    for (int i = 0; i < 50; ++i) {
        const Eigen::Vector3d w = c.unproject(3.3, 20.1, 1.0 + 0.1 * i);
        p.xyz.insert(p.xyz.end(), {float(w.x()), float(w.y()), float(w.z())});
        p.rgb.insert(p.rgb.end(), {0, 0, 0});
        p.source_pixel.push_back(i);
    }
    const auto cloud = sp::normalize_ndc(p, c, 1.0, 6.0);
    for (std::size_t i = 1; i < 50; ++i) {
        EXPECT_LT(cloud.positions[i * 3 + 2], cloud.positions[(i - 1) * 3 + 2]);
    }
}

TEST(Ndc, RejectsPointBehindCamera) {
    sp::ColoredPoints p;
    p.xyz = {0, 0, 2, 0, 0, -1};
    p.rgb.assign(6, 0.0f);
    p.source_pixel = {0, 1};
    try {
        sp::normalize_ndc(p, test_camera(), 1.0, 5.0);
        FAIL();
    } catch (const sp::GeometryError &e) {
        EXPECT_NE(std::string(e.what()).find("point 1"), std::string::npos);
    }
}

namespace {

// Ray cast against the axis-aligned box [-0.5,0.5]^2 x [3,4]; face id 0 =
// front (z=3), 1 = +x side, -1 = miss.
struct BoxHit {
    float depth;
    int face;
};

BoxHit cast_box(const sp::CameraSpec &c, int u, int v) {
    const Eigen::Vector3d o = c.center();
    const Eigen::Vector3d dcam = c.unproject(u + 0.5, v + 0.5, 1.0);
    const Eigen::Vector3d d = c.rotation.transpose() * dcam;
    const Eigen::Vector3d lo(-0.5, -0.5, 3.0), hi(0.5, 0.5, 4.0);
    double t0 = 0, t1 = 1e9;
    int axis = -1;
    for (int k = 0; k < 3; ++k) {
        double a = (lo(k) - o(k)) / d(k), b = (hi(k) - o(k)) / d(k);
        if (a > b) std::swap(a, b);
        if (a > t0) {
            t0 = a;
            axis = k;
        }
        t1 = std::min(t1, b);
    }
    if (t0 > t1 || axis < 0) return {std::nanf(""), -1};
    const Eigen::Vector3d hit = o + t0 * d;
    const int face = axis == 2 ? 0 : (axis == 0 && hit.x() > 0 ? 1 : 2);
    return {static_cast<float>(c.to_camera(hit).z()), face};
}

sp::ViewInput box_view(const sp::CameraSpec &c, int counts[3]) {
    sp::ViewInput v{sp::RgbImage(c.width, c.height, 0.5f), sp::DepthRaster(c.width, c.height, std::nanf("")), c};
    for (int y = 0; y < c.height; ++y) {
        for (int x = 0; x < c.width; ++x) {
            const auto h = cast_box(c, x, y);
            if (h.face >= 0) {
                v.depth.depth[static_cast<std::size_t>(y * c.width + x)] = h.depth;
                ++counts[h.face];
            }
        }
    }
    return v;
}

} // namespace

TEST(MergeViews, SingleViewEqualsDirectPath) {
    int counts[3] = {0, 0, 0};
    const auto v = box_view(test_camera(), counts);
    const auto merged = sp::merge_views({v}, 0);
    const auto pts = sp::back_project(v.image, v.depth, v.camera);
    const auto [near, far] = sp::depth_bounds(pts, v.camera);
    const auto direct = sp::normalize_ndc(pts, v.camera, near, far);
    EXPECT_EQ(merged.positions, direct.positions);
    EXPECT_EQ(merged.source_pixel, direct.source_pixel);
}

TEST(MergeViews, DuplicateViews) {
    int counts[3] = {0, 0, 0};
    const auto v = box_view(test_camera(), counts);
    const auto one = sp::merge_views({v}, 0);
    const auto two = sp::merge_views({v, v}, 0);
    ASSERT_EQ(two.size(), 2 * one.size());
    EXPECT_EQ(two.record.near, one.record.near);
    EXPECT_EQ(two.record.far, one.record.far);
    EXPECT_TRUE(std::equal(one.positions.begin(), one.positions.end(), two.positions.begin() + one.positions.size()));
}

TEST(MergeViews, CubeFacesFromTwoPoses) {
    // Center view sees only the front face; the side view (moved to +x,
    // yawed toward the box) also sees the +x face.
    auto center = test_camera();
    center.fx = center.fy = 20.0;
    auto side = center;
    const Eigen::Vector3d eye(1.2, 0.0, 0.5);
    side.rotation = sp::look_at_rotation(eye, Eigen::Vector3d(0, 0, 3.5));
    side.translation = -side.rotation * eye;
    int cc[3] = {0, 0, 0}, sc[3] = {0, 0, 0};
    const auto v0 = box_view(center, cc);
    const auto v1 = box_view(side, sc);
    ASSERT_GT(cc[0], 0);
    ASSERT_EQ(cc[1], 0);
    ASSERT_GT(sc[1], 0);
    sp::MergeReport rep;
    const auto cloud = sp::merge_views({v0, v1}, 0, &rep);
    // Classify merged points by face in world space.
    int got[3] = {0, 0, 0};
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto w = sp::denormalize(
            {cloud.positions[i * 3], cloud.positions[i * 3 + 1], cloud.positions[i * 3 + 2]}, cloud.record);
        if (std::abs(w.z() - 3.0) < 1e-3) ++got[0];
        else if (std::abs(w.x() - 0.5) < 1e-3) ++got[1];
        else ++got[2];
    }
    EXPECT_EQ(got[0], cc[0] + sc[0]);
    EXPECT_EQ(got[1] + static_cast<int>(rep.dropped_outside_anchor), sc[1]);
    EXPECT_GT(got[1], 0);
    EXPECT_EQ(got[2], 0);
}

TEST(MergeViews, SkipsEmptyViewsWithWarning) {
    int counts[3] = {0, 0, 0};
    const auto v = box_view(test_camera(), counts);
    sp::ViewInput empty{v.image, sp::DepthRaster(32, 24, std::nanf("")), v.camera};
    sp::MergeReport rep;
    const auto cloud = sp::merge_views({v, empty}, 0, &rep);
    EXPECT_EQ(rep.warnings.size(), 1u);
    EXPECT_GT(cloud.size(), 0u);
    EXPECT_THROW(sp::merge_views({empty}, 0), sp::GeometryError);
}

TEST(Ldi, PointCountAndValidation) {
    sp::LayeredDepthRaster ldi;
    ldi.width = 3;
    ldi.height = 2;
    ldi.pixels.resize(6);
    ldi.pixels[0] = {{1.0f, {255, 0, 0}}, {2.0f, {0, 255, 0}}};
    ldi.pixels[4] = {{1.5f, {1, 2, 3}}, {1.7f, {4, 5, 6}}, {3.0f, {7, 8, 9}}};
    ldi.pixels[5] = {{0.9f, {9, 9, 9}}};
    const auto c = test_camera().resized(3, 2);
    const auto pts = sp::back_project(sp::RgbImage(3, 2), ldi, c);
    EXPECT_EQ(pts.size(), ldi.layer_count());
    EXPECT_EQ(pts.size(), 6u);
    EXPECT_FLOAT_EQ(pts.rgb[3], 0.0f);
    EXPECT_FLOAT_EQ(pts.rgb[4], 1.0f);
    ldi.pixels[1] = {{2.0f, {0, 0, 0}}, {2.0f, {0, 0, 0}}};
    EXPECT_THROW(ldi.validate(), sp::GeometryError);
}

TEST(Formats, DepthAndLdiRoundTrip) {
    sp::DepthRaster d(4, 3, 2.5f);
    d.depth[5] = std::nanf("");
    d.depth[7] = 0.125f;
    sp::write_depth(tmp("d.dpth"), d);
    const auto back = sp::read_depth(tmp("d.dpth"));
    ASSERT_EQ(back.width, 4);
    ASSERT_EQ(back.height, 3);
    for (std::size_t i = 0; i < d.depth.size(); ++i) {
        if (d.valid(i)) EXPECT_EQ(back.depth[i], d.depth[i]);
        else EXPECT_FALSE(back.valid(i));
    }

    sp::LayeredDepthRaster ldi;
    ldi.width = 2;
    ldi.height = 1;
    ldi.pixels = {{{1.0f, {10, 20, 30}}, {4.0f, {40, 50, 60}}}, {}};
    sp::write_ldi(tmp("l.ldi"), ldi);
    const auto lb = sp::read_ldi(tmp("l.ldi"));
    ASSERT_EQ(lb.pixels.size(), 2u);
    ASSERT_EQ(lb.pixels[0].size(), 2u);
    EXPECT_EQ(lb.pixels[0][1].depth, 4.0f);
    EXPECT_EQ(lb.pixels[0][1].rgb, (std::array<std::uint8_t, 3>{40, 50, 60}));
    EXPECT_TRUE(lb.pixels[1].empty());
}

TEST(Formats, BadMagicAndTruncation) {
    {
        std::ofstream os(tmp("bad.dpth"), std::ios::binary);
        os << "NOPE1234";
    }
    EXPECT_THROW(sp::read_depth(tmp("bad.dpth")), sp::GeometryError);
    {
        std::ofstream os(tmp("short.dpth"), std::ios::binary);
        os.write("DPTH\x04\x00\x00\x00\x04\x00\x00\x00", 12);
    }
    EXPECT_THROW(sp::read_depth(tmp("short.dpth")), std::exception);
}

TEST(Formats, PngRoundTripAndPly) {
    sp::RgbImage img(5, 4);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<float>(i % 256) / 255.0f;
    sp::write_png(tmp("i.png"), img);
    const auto back = sp::read_png(tmp("i.png"));
    ASSERT_EQ(back.width, 5);
    ASSERT_EQ(back.height, 4);
    EXPECT_EQ(back.rgb, img.rgb);

    sp::write_ply(tmp("p.ply"), std::vector<float>{1, 2, 3}, std::vector<float>{1, 0, 0.5f});
    std::ifstream is(tmp("p.ply"));
    std::string all((std::istreambuf_iterator<char>(is)), {});
    EXPECT_NE(all.find("element vertex 1"), std::string::npos);
    EXPECT_NE(all.find("1 2 3 255 0 128"), std::string::npos);
}
