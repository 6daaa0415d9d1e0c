// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/eval/metrics.hpp"
#include "stylepoint/train/scene.hpp"

#include "support/json_schema.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

namespace sp = stylepoint;
namespace ev = stylepoint::eval;
namespace tr = stylepoint::train;

namespace {

struct TwoViews {
    tr::SyntheticScene scene;
    sp::ScenePointCloud cloud;
    sp::CameraSpec ci, cj;
    sp::RgbImage gi, gj;
    TwoViews(tr::SceneKind kind, int seed) : scene(tr::SyntheticScene::generate(kind, static_cast<std::uint64_t>(seed))) {
        cloud = scene.point_cloud();
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
        ci = tr::sample_view(scene.canonical, {}, rng);
        cj = tr::sample_view(scene.canonical, {}, rng);
        gi = scene.render(ci).image;
        gj = scene.render(cj).image;
    }
};

sp::RgbImage noisy(const sp::RgbImage &img, double sigma, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<float> n(0.0f, static_cast<float>(sigma));
    auto out = img;
    for (auto &v : out.rgb) v += n(rng);
    return out;
}

} // namespace

TEST(Warp, IdentityCopiesSourceOnMask) {
    const TwoViews t(tr::SceneKind::Boxes, 1);
    const auto w = ev::warp(t.gi, t.cloud, t.ci, t.ci);
    EXPECT_GT(w.masked_pixels(), t.gi.pixels() / 2);
    for (std::size_t p = 0; p < w.mask.size(); ++p) {
        for (int c = 0; c < 3; ++c) {
            if (w.mask[p]) EXPECT_EQ(w.image.rgb[p * 3 + c], t.gi.rgb[p * 3 + c]);
            else EXPECT_EQ(w.image.rgb[p * 3 + c], 0.0f); // never writes outside the mask
        }
    }
    EXPECT_EQ(ev::masked_rmse(w.image, t.gi, w.mask), 0.0);
}

TEST(Warp, SinglePointLandsOnOnePixel) {
    sp::ScenePointCloud cloud;
    cloud.record = {1.0, 10.0, sp::make_camera(16, 16, 60.0)};
    cloud.positions = {0.1f, -0.2f, 0.4f};
    cloud.colors = {1, 1, 1};
    cloud.source_pixel = {0};
    auto cam_j = cloud.record.anchor;
    cam_j.translation.x() += 0.05;
    sp::RgbImage src(16, 16);
    for (std::size_t k = 0; k < src.rgb.size(); ++k) src.rgb[k] = static_cast<float>(k % 97) / 97.0f;
    const auto pi = sp::render::plan_splats(cloud.positions, cloud.record, cloud.record.anchor);
    const auto pj = sp::render::plan_splats(cloud.positions, cloud.record, cam_j);
    const auto w = ev::warp(src, pi, pj);
    ASSERT_EQ(w.masked_pixels(), 1u);
    const int xi = static_cast<int>(std::floor(pi.pixel_xy[0])), yi = static_cast<int>(std::floor(pi.pixel_xy[1]));
    const int xj = static_cast<int>(std::floor(pj.pixel_xy[0])), yj = static_cast<int>(std::floor(pj.pixel_xy[1]));
    EXPECT_EQ(w.mask[static_cast<std::size_t>(yj * 16 + xj)], 1);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(w.image.at(xj, yj, c), src.at(xi, yi, c));
}

TEST(Warp, NearestPointWinsPixelConflicts) {
    // two points on one ray of the target camera: the nearer one's color is kept
    sp::ScenePointCloud cloud;
    cloud.record = {1.0, 10.0, sp::make_camera(16, 16, 60.0)};
    cloud.positions = {0.0f, 0.0f, -0.5f, 0.0f, 0.0f, 0.5f}; // far first, then near
    cloud.source_pixel = {0, 1};
    const auto plan = sp::render::plan_splats(cloud.positions, cloud.record, cloud.record.anchor);
    // the far point is hidden, so make both visible by hand
    auto pi = plan;
    pi.visible = {1, 1};
    pi.pixel_xy = {2.5f, 3.5f, 9.5f, 9.5f};
    auto pj = plan;
    pj.visible = {1, 1};
    sp::RgbImage src(16, 16);
    src.at(2, 3, 0) = 0.25f;
    src.at(9, 9, 0) = 0.75f;
    const auto w = ev::warp(src, pi, pj);
    ASSERT_EQ(w.masked_pixels(), 1u);
    EXPECT_EQ(w.image.at(static_cast<int>(pj.pixel_xy[2]), static_cast<int>(pj.pixel_xy[3]), 0), 0.75f);
}

TEST(Warp, MatchesDirectRenderOfTargetView) {
    for (auto kind : {tr::SceneKind::Boxes, tr::SceneKind::Planes, tr::SceneKind::Room}) {
        for (int seed = 1; seed <= 3; ++seed) {
            const TwoViews t(kind, seed);
            const auto w = ev::warp(t.gi, t.cloud, t.ci, t.cj);
            std::vector<double> err;
            for (std::size_t p = 0; p < w.mask.size(); ++p) {
                if (!w.mask[p]) continue;
                for (int c = 0; c < 3; ++c) err.push_back(std::fabs(w.image.rgb[p * 3 + c] - t.gj.rgb[p * 3 + c]));
            }
            std::sort(err.begin(), err.end());
            // nearest-pixel transport: typical pixels agree, silhouettes may not
            EXPECT_LE(err[err.size() / 2], 2.0 / 255) << tr::to_string(kind) << seed;
            EXPECT_LE(err[err.size() * 95 / 100], 8.0 / 255) << tr::to_string(kind) << seed;
        }
    }
}

TEST(Warp, NoCovisibilityNamesThePair) {
    const TwoViews t(tr::SceneKind::Boxes, 2);
    auto away = t.ci;
    away.rotation = Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitY()).toRotationMatrix() * away.rotation;
    const auto pi = sp::render::plan_splats(t.cloud.positions, t.cloud.record, t.ci);
    const auto pj = sp::render::plan_splats(t.cloud.positions, t.cloud.record, away);
    try {
        ev::warp(t.gi, pi, pj, 3, 4);
        FAIL();
    } catch (const ev::NoCovisibilityError &e) {
        EXPECT_EQ(e.i, 3);
        EXPECT_EQ(e.j, 4);
        EXPECT_NE(std::string(e.what()).find("3 and 4"), std::string::npos);
    }
}

TEST(Metrics, HandComputedRmse) {
    sp::RgbImage a(3, 1), b(3, 1);
    a.rgb = {0.1f, 0.2f, 0.3f, 0.5f, 0.5f, 0.5f, 1.0f, 0.0f, 0.0f};
    b.rgb = {0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.7f, 0.5f, 0.0f, 0.0f};
    // squared differences 0, 0.01 + 0.04, 0.25 over 9 values
    EXPECT_NEAR(ev::masked_rmse(a, b, {1, 1, 1}), std::sqrt(0.30 / 9), 1e-7);
    EXPECT_NEAR(ev::masked_rmse(a, b, {1, 1, 0}), std::sqrt(0.05 / 6), 1e-7);
    EXPECT_THROW(ev::masked_rmse(a, b, {0, 0, 0}), std::invalid_argument);
    EXPECT_THROW(ev::masked_rmse(a, b, {1, 1}), std::invalid_argument);
}

TEST(Metrics, Psnr) {
    sp::RgbImage a(4, 4, 0.5f), b(4, 4, 0.6f);
    EXPECT_NEAR(ev::psnr(a, b), 20.0, 1e-5);
    EXPECT_TRUE(std::isinf(ev::psnr(a, a)));
}

TEST(FeatureDistance, ZeroOnIdenticalAndMonotoneInNoise) {
    const TwoViews t(tr::SceneKind::Boxes, 3);
    const sp::model::StylePyramid pyr;
    const auto w = ev::warp(t.gi, t.cloud, t.ci, t.cj);
    EXPECT_EQ(ev::masked_feature_distance(t.gj, t.gj, w.mask, pyr), 0.0);
    double last = 0.0;
    for (double sigma : {0.05, 0.1, 0.2}) {
        const double d = ev::masked_feature_distance(noisy(t.gj, sigma, 5), t.gj, w.mask, pyr);
        EXPECT_GT(d, last) << sigma;
        last = d;
    }
    EXPECT_THROW(ev::masked_feature_distance(t.gj, t.gj, std::vector<std::uint8_t>(t.gj.pixels(), 0), pyr),
                 std::invalid_argument);
}

TEST(FeatureDistance, OutsideMaskDoesNotMatter) {
    const TwoViews t(tr::SceneKind::Planes, 1);
    const sp::model::StylePyramid pyr;
    std::vector<std::uint8_t> mask(t.gj.pixels(), 0);
    for (int y = 20; y < 40; ++y) {
        for (int x = 10; x < 30; ++x) mask[static_cast<std::size_t>(y * 64 + x)] = 1;
    }
    auto a = noisy(t.gj, 0.1, 2);
    auto b = a;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p]) b.rgb[p * 3] = 1.0f - b.rgb[p * 3];
    }
    EXPECT_EQ(ev::masked_feature_distance(a, t.gj, mask, pyr), ev::masked_feature_distance(b, t.gj, mask, pyr));
}

TEST(FeatureDistance, Golden) {
    const TwoViews t(tr::SceneKind::Boxes, 1);
    const sp::model::StylePyramid pyr;
    const auto w = ev::warp(t.gi, t.cloud, t.ci, t.cj);
    EXPECT_NEAR(ev::masked_feature_distance(w.image, t.gj, w.mask, pyr), 0.00037962108753819985, 1e-9);
}

namespace {

std::vector<sp::CameraSpec> orbit(const sp::CameraSpec &c0, int n, double deg) {
    std::vector<sp::CameraSpec> out;
    for (int k = 0; k < n; ++k) {
        const double a = 2.0 * M_PI * k / n;
        out.push_back(tr::offset_camera(c0, {0.1 * std::cos(a), 0.05 * std::sin(a), 0.0},
                                        {deg * std::sin(a), 0.5 * deg * std::cos(a), 0.0}));
    }
    return out;
}

} // namespace

TEST(ConsistencyRmse, StaticTrajectoryIsZero) {
    const TwoViews t(tr::SceneKind::Room, 1);
    const std::vector<sp::RgbImage> views(10, t.gi);
    const std::vector<sp::CameraSpec> cams(10, t.ci);
    const auto r = ev::consistency_rmse(views, cams, t.cloud);
    EXPECT_EQ(r.pairs.size(), 9u + 3u);
    EXPECT_TRUE(r.excluded.empty());
    EXPECT_EQ(r.short_range.pairs, 9u);
    EXPECT_EQ(r.long_range.pairs, 3u);
    for (const auto &p : r.pairs) {
        EXPECT_EQ(p.rmse, 0.0);
        EXPECT_EQ(p.feature_distance, 0.0);
    }
    EXPECT_EQ(r.all.mean_rmse, 0.0);
}

TEST(ConsistencyRmse, GroundTruthTrajectoryAndSymmetry) {
    const TwoViews t(tr::SceneKind::Boxes, 2);
    const auto cams = orbit(t.scene.canonical, 12, 6.0);
    std::vector<sp::RgbImage> views;
    for (const auto &c : cams) views.push_back(t.scene.render(c).image);
    const auto r = ev::consistency_rmse(views, cams, t.cloud);
    ASSERT_EQ(r.pairs.size(), 11u + 5u);
    for (const auto &p : r.pairs) {
        EXPECT_GE(p.rmse, 0.0);
        EXPECT_LT(p.rmse, 0.08);
        EXPECT_EQ(p.j - p.i, p.range == ev::PairRange::Short ? 1 : 7);
    }
    // swapping direction only changes the resampling
    std::vector<sp::RgbImage> rev(views.rbegin(), views.rend());
    std::vector<sp::CameraSpec> rcams(cams.rbegin(), cams.rend());
    const auto rr = ev::consistency_rmse(rev, rcams, t.cloud);
    for (const auto &p : r.pairs) {
        const auto it = std::find_if(rr.pairs.begin(), rr.pairs.end(), [&](const ev::PairMetrics &q) {
            return q.i == 11 - p.j && q.j == 11 - p.i;
        });
        ASSERT_NE(it, rr.pairs.end());
        EXPECT_NEAR(it->rmse, p.rmse, 0.1 * p.rmse + 1e-3);
    }
    // means do not depend on pair order
    auto shuffled = r;
    std::mt19937 rng(1);
    std::shuffle(shuffled.pairs.begin(), shuffled.pairs.end(), rng);
    ev::summarize(shuffled);
    EXPECT_NEAR(shuffled.all.mean_rmse, r.all.mean_rmse, 1e-12);
    EXPECT_NEAR(shuffled.long_range.mean_feature_distance, r.long_range.mean_feature_distance, 1e-12);
}

TEST(ConsistencyRmse, ExcludesPairsWithoutCovisibility) {
    const TwoViews t(tr::SceneKind::Boxes, 1);
    auto away = t.ci;
    away.rotation = Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitY()).toRotationMatrix() * away.rotation;
    const auto r = ev::consistency_rmse({t.gi, t.gi, t.gj}, {t.ci, away, t.cj}, t.cloud);
    EXPECT_TRUE(r.pairs.empty());
    ASSERT_EQ(r.excluded.size(), 2u);
    EXPECT_EQ(r.excluded[0].i, 0);
    EXPECT_EQ(r.excluded[1].j, 2);
    EXPECT_THROW(ev::consistency_rmse({t.gi}, {t.ci}, t.cloud), std::invalid_argument);
}

TEST(Report, JsonMatchesSchemaAndCsvRoundTrips) {
    const TwoViews t(tr::SceneKind::Planes, 2);
    const auto cams = orbit(t.scene.canonical, 9, 5.0);
    std::vector<sp::RgbImage> views;
    for (const auto &c : cams) views.push_back(t.scene.render(c).image);
    auto r = ev::consistency_rmse(views, cams, t.cloud);
    r.excluded.push_back({4, 5, ev::PairRange::Short, "views 4 and 5 share no visible point"});
    std::ifstream in(std::filesystem::path(STYLEPOINT_SOURCE_DIR) / "docs/schemas/consistency_report.schema.json");
    ASSERT_TRUE(in.good());
    const auto schema = nlohmann::json::parse(in);
    const auto doc = nlohmann::json::parse(ev::report_json(r));
    EXPECT_EQ(sp::testing::schema_violation(doc, schema), "");
    EXPECT_EQ(doc["summary"]["long"]["pairs"], 2);
    auto broken = doc;
    broken["pairs"][0]["rmse"] = -1.0;
    EXPECT_NE(sp::testing::schema_violation(broken, schema), "");
    broken = doc;
    broken["summary"].erase("all");
    EXPECT_NE(sp::testing::schema_violation(broken, schema), "");

    const auto path = std::filesystem::temp_directory_path() / "stylepoint_report.csv";
    ev::write_report_csv(path, r);
    std::ifstream csv(path);
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "i,j,range,rmse,feature_distance,covisible_pixels");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, static_cast<int>(r.pairs.size()) + 3);
    std::filesystem::remove(path);
}
