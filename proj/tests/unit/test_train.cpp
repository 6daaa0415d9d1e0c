// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/tensor/tape.hpp"
#include "stylepoint/train/styles.hpp"
#include "stylepoint/train/trainer.hpp"

#include "support/gradcheck.hpp"
#include "support/loss_oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

namespace sp = stylepoint;
namespace tr = stylepoint::train;
namespace rd = stylepoint::render;
namespace md = stylepoint::model;
using sp::Tensor;
using sp::testing::random_tensor;

namespace {

Tensor planar(const sp::RgbImage &img) { return Tensor::from({3, img.height, img.width}, img.to_planar()); }

tr::ModelConfig toy_config() {
    tr::ModelConfig c;
    c.encoder.stages = {{1, 4, 4, 0.3f, 8}, {1, 6, 4, 0.6f, 8}, {1, 8, 4, 1.2f, 8}};
    c.stylizer = {8, 8, 128, 8};
    c.decoder.channels = 8;
    return c;
}

} // namespace

TEST(Scene, DeterministicAndHoleFree) {
    for (auto kind : {tr::SceneKind::Boxes, tr::SceneKind::Planes, tr::SceneKind::Room}) {
        const auto a = tr::SyntheticScene::generate(kind, 3);
        const auto b = tr::SyntheticScene::generate(kind, 3);
        const auto ra = a.render(a.canonical), rb = b.render(b.canonical);
        EXPECT_EQ(ra.image.rgb, rb.image.rgb);
        EXPECT_EQ(ra.depth.depth, rb.depth.depth);
        EXPECT_NE(ra.image.rgb, tr::SyntheticScene::generate(kind, 4).render(a.canonical).image.rgb);
        std::mt19937_64 rng(5);
        for (int t = 0; t < 5; ++t) {
            const auto cam = tr::sample_view(a.canonical, {}, rng);
            const auto r = a.render(cam);
            EXPECT_EQ(r.depth.valid_count(), r.depth.depth.size()) << tr::to_string(kind);
        }
        EXPECT_EQ(a.point_cloud().size(), 64u * 64u);
    }
    EXPECT_THROW(tr::parse_scene_kind("cave"), std::invalid_argument);
}

TEST(Scene, DepthMatchesAnalyticWall) {
    // a planes scene seen straight on: any pixel showing the back wall is at z = 6
    const auto s = tr::SyntheticScene::generate(tr::SceneKind::Planes, 2);
    const auto r = s.render(s.canonical);
    int wall = 0;
    for (float d : r.depth.depth) {
        if (std::fabs(d - 6.0f) < 1e-4f) ++wall;
        else EXPECT_LT(d, 5.06f);
    }
    EXPECT_GT(wall, 100);
}

TEST(SampleView, ZeroRangeIsCanonicalAndSamplesStayInRange) {
    const auto s = tr::SyntheticScene::generate(tr::SceneKind::Boxes, 1);
    std::mt19937_64 rng(1);
    const auto same = tr::sample_view(s.canonical, {0.0, 0.0}, rng);
    EXPECT_TRUE(same.rotation.isApprox(s.canonical.rotation, 1e-12));
    EXPECT_LT((same.translation - s.canonical.translation).norm(), 1e-12);
    std::mt19937_64 a(9), b(9);
    for (int i = 0; i < 1000; ++i) {
        const auto cam = tr::sample_view(s.canonical, {}, a);
        const auto again = tr::sample_view(s.canonical, {}, b);
        EXPECT_EQ(cam.pose_matrix(), again.pose_matrix());
        const auto off = tr::pose_offset(s.canonical, cam);
        for (int k = 0; k < 3; ++k) {
            EXPECT_LE(std::fabs(off.translation[k]), 0.15 + 1e-9);
            EXPECT_LE(std::fabs(off.euler_deg[k]), 10.0 + 1e-6);
        }
    }
}

TEST(Styles, KindsDifferAndAreDeterministic) {
    const auto bank = tr::style_bank(6, 11);
    ASSERT_EQ(bank.size(), 6u);
    EXPECT_EQ(bank[0].rgb, tr::style_bank(1, 11)[0].rgb);
    for (std::size_t i = 1; i < bank.size(); ++i) EXPECT_NE(bank[i].rgb, bank[0].rgb);
    for (const auto &img : bank) {
        for (float v : img.rgb) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
    EXPECT_THROW(tr::parse_style_kind("cubist"), std::invalid_argument);
}

TEST(Losses, L1AndFeatureBasics) {
    std::mt19937 rng(1);
    const auto img = random_tensor({3, 16, 16}, rng, 0.0f, 1.0f, false);
    const md::StylePyramid pyr;
    EXPECT_FLOAT_EQ(tr::l1_loss(img, img).item(), 0.0f);
    EXPECT_FLOAT_EQ(tr::feature_loss(pyr, img, img).item(), 0.0f);
    EXPECT_NEAR(tr::l1_loss(sp::ops::add_scalar(img, 0.1f), img).item(), 0.1f, 1e-6f);
    EXPECT_THROW(tr::l1_loss(img, Tensor::zeros({3, 16, 8})), sp::ShapeError);
}

TEST(Losses, ConsistencySinglePointIsAbsoluteDifference) {
    rd::SplatPlan a, b;
    for (auto *p : {&a, &b}) {
        p->width = 4;
        p->height = 4;
        p->visible = {1};
        p->pixel_xy = {1.5f, 2.5f};
    }
    const auto ia = Tensor::full({3, 4, 4}, 0.2f), ib = Tensor::full({3, 4, 4}, 0.7f);
    const auto t = tr::consistency_loss({&a, &b}, {ia, ib});
    EXPECT_EQ(t.triples, 1);
    EXPECT_NEAR(t.loss.item(), 3 * 0.5f, 1e-6f); // L1 over the three channels
    EXPECT_FLOAT_EQ(tr::consistency_loss({&a, &b}, {ia, ia}).loss.item(), 0.0f);
    EXPECT_THROW(tr::consistency_loss({&a}, {ia}), std::invalid_argument);
}

TEST(Losses, ConsistencyMatchesPerTripleLoop) {
    const auto s = tr::SyntheticScene::generate(tr::SceneKind::Boxes, 5, 16, 16);
    const auto cloud = s.point_cloud();
    for (int seed = 0; seed < 4; ++seed) {
        std::mt19937_64 rng(seed);
        std::mt19937 irng(seed);
        std::vector<rd::SplatPlan> plans;
        std::vector<Tensor> images;
        for (int v = 0; v < 3; ++v) {
            plans.push_back(rd::plan_splats(cloud.positions, cloud.record, tr::sample_view(s.canonical, {}, rng)));
            images.push_back(random_tensor({3, 16, 16}, irng, 0.0f, 1.0f, false));
        }
        std::vector<const rd::SplatPlan *> ptrs{&plans[0], &plans[1], &plans[2]};
        const auto t = tr::consistency_loss(ptrs, images);
        EXPECT_GT(t.triples, 100);
        std::vector<sp::testing::Map> maps;
        for (const auto &img : images) maps.push_back(sp::testing::to_map(img));
        EXPECT_NEAR(t.loss.item(), sp::testing::consistency(ptrs, maps), 1e-6);
        // view order does not matter
        std::vector<const rd::SplatPlan *> rev{&plans[2], &plans[0], &plans[1]};
        EXPECT_NEAR(tr::consistency_loss(rev, {images[2], images[0], images[1]}).loss.item(), t.loss.item(), 1e-5);
    }
}

TEST(Losses, GlobalStyleZeroOnSameImage) {
    const md::StylePyramid pyr;
    const auto style = planar(tr::procedural_style(tr::StyleKind::Noise, 3, 32, 32));
    const auto st = tr::feature_stats(pyr.features(style));
    EXPECT_FLOAT_EQ(tr::global_style_loss(st, st).item(), 0.0f);
    const auto other = tr::feature_stats(pyr.features(planar(tr::procedural_style(tr::StyleKind::Stripes, 3, 32, 32))));
    EXPECT_GT(tr::global_style_loss(other, st).item(), 0.0f);
}

namespace {

// Two sampled views of a 16x16 scene; the losses are checked as functions of
// the rendered images.
struct ToyViews {
    tr::SyntheticScene scene = tr::SyntheticScene::generate(tr::SceneKind::Boxes, 8, 16, 16);
    std::vector<sp::CameraSpec> cams;
    std::vector<rd::SplatPlan> plans;
    std::vector<Tensor> gts, rendered;
    ToyViews() {
        const auto cloud = scene.point_cloud();
        std::mt19937_64 rng(3);
        std::mt19937 irng(4);
        for (int v = 0; v < 2; ++v) {
            cams.push_back(tr::sample_view(scene.canonical, {}, rng));
            plans.push_back(rd::plan_splats(cloud.positions, cloud.record, cams.back()));
            gts.push_back(planar(scene.render(cams.back()).image));
            rendered.push_back(random_tensor({3, 16, 16}, irng, 0.0f, 1.0f));
        }
    }
    std::vector<const rd::SplatPlan *> plan_ptrs() const { return {&plans[0], &plans[1]}; }
};

using Oracle = std::function<double(const std::vector<sp::testing::Map> &)>;

// Tape gradient of `loss` w.r.t. the rendered views against central
// differences of the double-precision `oracle`.
void expect_gradients(const ToyViews &toy, const std::function<Tensor()> &loss, const Oracle &oracle,
                      const char *name) {
    std::vector<std::vector<double>> x, analytic;
    double value = 0.0;
    {
        sp::Tape tape;
        sp::TapeScope scope(tape);
        for (const auto &r : toy.rendered) r.impl_ptr()->grad.clear();
        const Tensor l = loss();
        value = l.item();
        tape.backward(l);
    }
    for (const auto &r : toy.rendered) {
        const auto d = r.to_vector();
        x.emplace_back(d.begin(), d.end());
        analytic.emplace_back(r.grad().begin(), r.grad().end());
    }
    auto f = [&](const std::vector<std::vector<double>> &v) {
        std::vector<sp::testing::Map> maps;
        for (const auto &img : v) maps.push_back(sp::testing::to_map(img, 3, 16, 16));
        return oracle(maps);
    };
    EXPECT_NEAR(value, f(x), 1e-5 * std::max(1.0, std::fabs(value))) << name;
    const auto r = sp::testing::double_fd(f, x, analytic, 128);
    EXPECT_LT(static_cast<double>(r.skipped), 0.02 * static_cast<double>(r.checked + r.skipped)) << name;
    EXPECT_LE(r.rel_error, 1e-3) << name;
}

} // namespace

TEST(Losses, ViewSynthesisGradientsMatchFiniteDifferences) {
    namespace o = sp::testing;
    const ToyViews toy;
    const md::StylePyramid pyr;
    std::vector<o::Map> gt;
    std::vector<std::vector<o::Map>> gt_levels;
    for (const auto &g : toy.gts) {
        gt.push_back(o::to_map(g));
        gt_levels.push_back(o::pyramid_levels(gt.back(), pyr));
    }
    auto rgb = [&] { return tr::l1_loss(toy.rendered[0], toy.gts[0]) + tr::l1_loss(toy.rendered[1], toy.gts[1]); };
    auto feat = [&] {
        return tr::feature_loss(pyr, toy.rendered[0], toy.gts[0]) + tr::feature_loss(pyr, toy.rendered[1], toy.gts[1]);
    };
    auto cns = [&] { return tr::consistency_loss(toy.plan_ptrs(), toy.rendered).loss; };
    const Oracle o_rgb = [&](const auto &m) { return o::l1(m[0], gt[0]) + o::l1(m[1], gt[1]); };
    const Oracle o_feat = [&](const auto &m) {
        double s = 0.0;
        for (std::size_t v = 0; v < m.size(); ++v) {
            const auto lv = o::pyramid_levels(m[v], pyr);
            for (std::size_t l = 0; l < lv.size(); ++l) s += o::mse(lv[l], gt_levels[v][l]);
        }
        return s;
    };
    const Oracle o_cns = [&](const auto &m) { return o::consistency(toy.plan_ptrs(), m); };
    expect_gradients(toy, rgb, o_rgb, "rgb");
    expect_gradients(toy, feat, o_feat, "feat");
    expect_gradients(toy, cns, o_cns, "cns");
    expect_gradients(
        toy, [&] { return rgb() + feat() + cns(); }, [&](const auto &m) { return o_rgb(m) + o_feat(m) + o_cns(m); },
        "total");
}

TEST(Losses, StylizationGradientsMatchFiniteDifferences) {
    namespace o = sp::testing;
    const ToyViews toy;
    const md::StylePyramid pyr;
    const auto style_img = tr::procedural_style(tr::StyleKind::Patches, 1, 32, 32);
    const auto style = tr::TrainStyle::prepare(style_img, pyr);
    const auto style_levels = o::pyramid_levels(o::to_map(planar(style_img)), pyr);
    std::vector<Tensor> targets;
    std::vector<o::Map> target_maps;
    for (const auto &gt : toy.gts) {
        targets.push_back(tr::local_style_target(pyr.features(gt).back(), style.features.grid));
        // [H*W, C] grid back to [C, H, W]
        const auto t = targets.back().to_vector();
        const int c = static_cast<int>(targets.back().size(1)), side = 4;
        o::Map m{c, side, side, std::vector<double>(t.size())};
        for (int p = 0; p < side * side; ++p) {
            for (int k = 0; k < c; ++k) m.at(k, p / side, p % side) = t[static_cast<std::size_t>(p * c + k)];
        }
        target_maps.push_back(m);
    }
    auto global = [&] {
        return tr::global_style_loss(tr::feature_stats(pyr.features(toy.rendered[0])), style.stats) +
               tr::global_style_loss(tr::feature_stats(pyr.features(toy.rendered[1])), style.stats);
    };
    auto local = [&] {
        return tr::local_style_loss(pyr.features(toy.rendered[0]).back(), targets[0]) +
               tr::local_style_loss(pyr.features(toy.rendered[1]).back(), targets[1]);
    };
    auto cns = [&] { return tr::consistency_loss(toy.plan_ptrs(), toy.rendered).loss; };
    const Oracle o_global = [&](const auto &m) {
        double s = 0.0;
        for (const auto &v : m) s += o::global_style(o::pyramid_levels(v, pyr), style_levels);
        return s;
    };
    const Oracle o_local = [&](const auto &m) {
        double s = 0.0;
        for (std::size_t v = 0; v < m.size(); ++v) s += o::mse(o::pyramid_levels(m[v], pyr).back(), target_maps[v]);
        return s;
    };
    const Oracle o_cns = [&](const auto &m) { return o::consistency(toy.plan_ptrs(), m); };
    expect_gradients(toy, global, o_global, "global");
    expect_gradients(toy, local, o_local, "local");
    expect_gradients(
        toy, [&] { return global() + local() + cns(); },
        [&](const auto &m) { return o_global(m) + o_local(m) + o_cns(m); }, "total");
}

namespace {

struct Toy {
    tr::ModelConfig mc = toy_config();
    std::vector<tr::TrainScene> scenes;
    std::vector<tr::TrainStyle> styles;
    tr::TrainConfig cfg;
    Toy() {
        scenes.push_back(tr::TrainScene::prepare(tr::SyntheticScene::generate(tr::SceneKind::Boxes, 1, 16, 16),
                                                 mc.encoder));
        scenes.push_back(tr::TrainScene::prepare(tr::SyntheticScene::generate(tr::SceneKind::Room, 2, 16, 16),
                                                 mc.encoder));
        const md::StylePyramid pyr(mc.pyramid);
        for (const auto &img : tr::style_bank(2, 4, 32)) styles.push_back(tr::TrainStyle::prepare(img, pyr));
        cfg.stage1_iterations = 4;
        cfg.stage2_iterations = 4;
    }
};

sp::Archive snapshot(const tr::TrainState &s) { return md::to_archive(tr::checkpoint_entries(s.model)); }

void expect_same(const sp::Archive &a, const sp::Archive &b) {
    ASSERT_EQ(a.size(), b.size());
    for (const auto &[k, t] : a) EXPECT_EQ(t.to_vector(), b.at(k).to_vector()) << k;
}

} // namespace

TEST(Training, RepeatedRunsAreIdenticalAndResumeExactly) {
    const Toy toy;
    tr::TrainState a{tr::Model::init(toy.mc), {}}, b{tr::Model::init(toy.mc), {}};
    tr::train_stage1(a, toy.scenes, toy.cfg);
    tr::train_stage2(a, toy.scenes, toy.styles, toy.cfg);
    // b: stop halfway through each stage, checkpoint, reload into a fresh model
    const auto dir = std::filesystem::temp_directory_path() / "stylepoint_train_test";
    std::filesystem::create_directories(dir);
    tr::train_stage1(b, toy.scenes, toy.cfg, {}, 2);
    tr::save_checkpoint(dir / "s1.spck", b);
    tr::TrainState c{tr::Model::init(toy.mc), {}};
    tr::load_checkpoint(dir / "s1.spck", c);
    EXPECT_EQ(c.iteration, 2);
    tr::train_stage1(c, toy.scenes, toy.cfg);
    tr::train_stage2(c, toy.scenes, toy.styles, toy.cfg, {}, 1);
    tr::save_checkpoint(dir / "s2.spck", c);
    tr::TrainState d{tr::Model::init(toy.mc), {}};
    tr::load_checkpoint(dir / "s2.spck", d);
    EXPECT_EQ(d.stage, 2);
    EXPECT_EQ(d.adam.m, c.adam.m);
    tr::train_stage2(d, toy.scenes, toy.styles, toy.cfg);
    expect_same(snapshot(a), snapshot(d));
    EXPECT_EQ(a.adam.v, d.adam.v);
    std::filesystem::remove_all(dir);
}

TEST(Training, StageTwoLeavesEncoderUntouched) {
    const Toy toy;
    tr::TrainState s{tr::Model::init(toy.mc), {}};
    tr::train_stage1(s, toy.scenes, toy.cfg);
    const auto before = md::to_archive(s.model.encoder_params());
    const auto dec_before = md::to_archive(s.model.decoder_params());
    const auto log = tr::train_stage2(s, toy.scenes, toy.styles, toy.cfg);
    expect_same(before, md::to_archive(s.model.encoder_params()));
    EXPECT_NE(dec_before.begin()->second.to_vector(), md::to_archive(s.model.decoder_params()).begin()->second.to_vector());
    ASSERT_EQ(log.size(), 4u);
    for (const auto &r : log) {
        EXPECT_EQ(r.stage, 2);
        EXPECT_GT(r.global, 0.0);
        EXPECT_GE(r.cns, 0.0);
    }
}

TEST(Training, StageTwoNeedsFinishedStageOne) {
    const Toy toy;
    tr::TrainState s{tr::Model::init(toy.mc), {}};
    tr::train_stage1(s, toy.scenes, toy.cfg, {}, 1);
    EXPECT_THROW(tr::train_stage2(s, toy.scenes, toy.styles, toy.cfg), tr::TrainingError);
}

TEST(Training, NonFiniteLossAbortsWithDiagnostics) {
    Toy toy;
    tr::TrainState s{tr::Model::init(toy.mc), {}};
    s.model.decoder.to_rgb.bias.data()[0] = NAN;
    try {
        tr::train_stage1(s, toy.scenes, toy.cfg);
        FAIL();
    } catch (const tr::TrainingError &e) {
        EXPECT_NE(std::string(e.what()).find("iteration 0"), std::string::npos) << e.what();
    }
}
