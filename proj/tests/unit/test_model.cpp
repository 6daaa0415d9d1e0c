// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/model/encoder.hpp"
#include "stylepoint/model/stylizer.hpp"
#include "stylepoint/tensor/tape.hpp"

#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <iomanip>
#include <numeric>

namespace sp = stylepoint;
namespace md = stylepoint::model;
using sp::Tensor;
using sp::testing::check_gradients;
using sp::testing::random_tensor;
using sp::testing::weighted;
using sp::testing::weights_like;

namespace {

std::vector<std::vector<std::int64_t>> lists(const sp::pointcloud::NeighborGraph &g) {
    std::vector<std::vector<std::int64_t>> out;
    for (std::int64_t q = 0; q < g.queries(); ++q) {
        const auto nb = g.of(q);
        out.emplace_back(nb.begin(), nb.end());
    }
    return out;
}

// Deterministic wavy sheet with a color ramp, n = side * side points.
sp::ScenePointCloud sheet_cloud(int side) {
    sp::ScenePointCloud c;
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const float u = (x + 0.5f) / side * 2 - 1, v = (y + 0.5f) / side * 2 - 1;
            c.positions.insert(c.positions.end(), {u, v, 0.3f * std::sin(3 * u) * std::cos(2 * v)});
            c.colors.insert(c.colors.end(), {0.5f + 0.5f * u, 0.5f + 0.5f * v, 0.5f + 0.4f * std::sin(5 * u * v)});
            c.source_pixel.push_back(y * side + x);
        }
    }
    return c;
}

struct Checksum {
    double sum = 0.0, sum_sq = 0.0;
};

Checksum checksum(std::span<const float> v) {
    Checksum c;
    for (float x : v) {
        c.sum += x;
        c.sum_sq += static_cast<double>(x) * x;
    }
    return c;
}

md::EncoderConfig small_encoder() {
    md::EncoderConfig cfg;
    cfg.stages = {{1, 8, 4, 0.2f, 16}, {2, 12, 4, 0.4f, 16}, {2, 16, 4, 0.8f, 16}};
    return cfg;
}

} // namespace

TEST(MaxRelative, EmptyAndTies) {
    auto src = Tensor::from({3, 2}, {1, 5, 3, 5, 0, 0}, true);
    auto ctr = Tensor::from({2, 2}, {1, 1, 2, 2}, true);
    // Query 0: neighbors 0 and 1 (channel 1 ties at 5 -> index 0). Query 1: none.
    const std::vector<std::int64_t> off{0, 2, 2}, nb{0, 1};
    sp::Tape tape;
    sp::TapeScope scope(tape);
    const auto out = sp::ops::max_relative(src, ctr, off, nb);
    EXPECT_EQ(out.to_vector(), (std::vector<float>{2, 4, 0, 0}));
    tape.backward(sp::ops::sum_all(out));
    EXPECT_EQ(std::vector<float>(src.grad().begin(), src.grad().end()), (std::vector<float>{0, 1, 1, 0, 0, 0}));
    EXPECT_EQ(std::vector<float>(ctr.grad().begin(), ctr.grad().end()), (std::vector<float>{-1, -1, 0, 0}));
}

TEST(MaxRelative, GradientMatchesFiniteDifferences) {
    std::mt19937 rng(4);
    auto src = random_tensor({12, 3}, rng);
    auto ctr = random_tensor({5, 3}, rng);
    const std::vector<std::int64_t> off{0, 3, 3, 7, 8, 12}, nb{0, 4, 9, 1, 2, 3, 11, 5, 6, 7, 8, 10};
    auto w = weights_like(Tensor::zeros({5, 3}), rng);
    const auto r = check_gradients([&] { return weighted(sp::ops::max_relative(src, ctr, off, nb), w); }, {src, ctr});
    EXPECT_LE(r.max_rel_error, 1e-3);
}

TEST(MrConv, IsolatedPoint) {
    md::ParamInit init(1);
    auto p = md::MrConvParams::init(3, 4, init);
    p.norm.state.running_mean = Tensor::from({4}, {0.1f, 0.2f, 0.3f, 0.4f});
    p.norm.state.running_var = Tensor::from({4}, {1.0f, 2.0f, 0.5f, 1.5f});
    const auto x = Tensor::from({1, 3}, {0.3f, -0.7f, 1.1f});
    sp::pointcloud::NeighborGraph empty;
    empty.offsets = {0, 0};
    const auto out = md::mr_conv(x, x, empty, p, false).to_vector();
    const auto want = sp::testing::oracle_mr_conv(x.to_vector(), x.to_vector(), 3, {{}}, p.linear.weight.to_vector(),
                                                  p.linear.bias.to_vector(), p.norm.gamma.to_vector(),
                                                  p.norm.beta.to_vector(), false, p.norm.state.running_mean.to_vector(),
                                                  p.norm.state.running_var.to_vector());
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(out[i], want[i], 1e-6);
    }
}

TEST(MrConv, CoincidentEqualPointsAgree) {
    md::ParamInit init(2);
    const auto p = md::MrConvParams::init(3, 5, init);
    const std::vector<float> pos{0.1f, 0.2f, 0.3f, 0.1f, 0.2f, 0.3f};
    const auto x = Tensor::from({2, 3}, {0.5f, -0.1f, 0.9f, 0.5f, -0.1f, 0.9f});
    const auto g = sp::pointcloud::ball_query(pos, pos, 0.01f, 16);
    const auto out = md::mr_conv(x, x, g, p, false).to_vector();
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(out[i], out[5 + i]);
    }
}

TEST(MrConv, MatchesNaiveLoop) {
    std::mt19937 rng(21);
    for (std::size_t n : {32u, 256u}) {
        const auto pos = sp::testing::random_points(n, rng);
        const auto sub = sp::testing::random_points(n / 4, rng);
        md::ParamInit init(n);
        const auto p = md::MrConvParams::init(6, 16, init);
        auto src = random_tensor({static_cast<std::int64_t>(n), 6}, rng);
        auto ctr = random_tensor({static_cast<std::int64_t>(n / 4), 6}, rng);
        const auto g = sp::pointcloud::ball_query(sub, pos, 0.5f, 16);
        for (bool training : {true, false}) {
            const auto rm = p.norm.state.running_mean.to_vector(), rv = p.norm.state.running_var.to_vector();
            const auto out = md::mr_conv(src, ctr, g, p, training).to_vector();
            const auto want = sp::testing::oracle_mr_conv(
                src.to_vector(), ctr.to_vector(), 6, lists(g), p.linear.weight.to_vector(), p.linear.bias.to_vector(),
                p.norm.gamma.to_vector(), p.norm.beta.to_vector(), training, rm, rv);
            for (std::size_t i = 0; i < out.size(); ++i) {
                ASSERT_NEAR(out[i], want[i], 1e-5) << "n=" << n << " training=" << training;
            }
        }
    }
}

TEST(MrConv, RejectsChannelMismatch) {
    md::ParamInit init(3);
    const auto p = md::MrConvParams::init(4, 8, init);
    const auto x = Tensor::zeros({2, 3});
    sp::pointcloud::NeighborGraph g;
    g.offsets = {0, 0, 0};
    EXPECT_THROW(md::mr_conv(x, x, g, p, false), sp::ShapeError);
}

TEST(Encoder, DefaultConfigShapes) {
    md::EncoderConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.min_points(), 64);
    md::ParamInit init(5);
    const auto params = md::EncoderParams::init(cfg, init);
    const auto cloud = sheet_cloud(64);
    const auto out = md::encode(cloud, cfg, params, false);
    EXPECT_EQ(out.features.shape(), (sp::Shape{64, 256}));
    EXPECT_EQ(out.positions.size(), 64u * 3);
    // Lineage points at the original cloud position.
    for (std::size_t i = 0; i < out.lineage.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            EXPECT_EQ(out.positions[i * 3 + k], cloud.positions[static_cast<std::size_t>(out.lineage[i]) * 3 + k]);
        }
    }
    md::EncoderConfig bad = cfg;
    bad.stages[1].channels = 64;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    EXPECT_THROW(md::encode(sheet_cloud(7), cfg, params, false), std::invalid_argument);
}

TEST(Encoder, OutputCountIsNestedCeil) {
    const auto cfg = small_encoder();
    for (int side : {9, 13, 16}) {
        const auto g = md::build_encoder_geometry(sheet_cloud(side).positions, cfg);
        std::int64_t n = side * side;
        for (int s = 0; s < 3; ++s) n = (n + 3) / 4;
        EXPECT_EQ(static_cast<std::int64_t>(g.levels.back().pick.size()), n);
    }
}

TEST(Encoder, PermutationEquivariance) {
    // Sparse enough that no ball query truncates, so neighbor sets do not
    // depend on index order.
    // Jittered so that FPS sees no exact distance ties.
    auto cfg = small_encoder();
    for (auto &s : cfg.stages) s.max_neighbors = 1000;
    auto cloud = sheet_cloud(16);
    std::mt19937 jitter(12);
    std::uniform_real_distribution<float> u(-0.02f, 0.02f);
    for (auto &v : cloud.positions) v += u(jitter);
    md::ParamInit init(8);
    const auto params = md::EncoderParams::init(cfg, init);
    const auto base = md::encode(cloud, cfg, params, false);

    std::mt19937 rng(3);
    std::vector<std::int64_t> perm(cloud.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    sp::ScenePointCloud shuffled;
    for (auto i : perm) {
        const auto k = static_cast<std::size_t>(i);
        shuffled.positions.insert(shuffled.positions.end(), cloud.positions.begin() + k * 3,
                                  cloud.positions.begin() + k * 3 + 3);
        shuffled.colors.insert(shuffled.colors.end(), cloud.colors.begin() + k * 3, cloud.colors.begin() + k * 3 + 3);
        shuffled.source_pixel.push_back(i);
    }
    const auto moved = md::encode(shuffled, cfg, params, false);
    ASSERT_EQ(moved.lineage.size(), base.lineage.size());
    const auto c = static_cast<std::size_t>(base.features.size(1));
    for (std::size_t i = 0; i < base.lineage.size(); ++i) {
        // Original index of the i-th selected point in the shuffled run.
        const auto orig = perm[static_cast<std::size_t>(moved.lineage[i])];
        EXPECT_EQ(orig, base.lineage[i]);
        for (std::size_t ch = 0; ch < c; ++ch) {
            EXPECT_NEAR(moved.features.data()[i * c + ch], base.features.data()[i * c + ch], 1e-5);
        }
    }
}

TEST(Encoder, GoldenChecksum) {
    md::EncoderConfig cfg;
    md::ParamInit init(1234);
    const auto params = md::EncoderParams::init(cfg, init);
    const auto out = md::encode(sheet_cloud(64), cfg, params, false);
    const auto c = checksum(out.features.data());
    // Captured from the first run of this configuration.
    EXPECT_NEAR(c.sum, 2435.9170072438137, 1e-4 * 2435.92) << std::setprecision(17) << c.sum;
    EXPECT_NEAR(c.sum_sq, 14626.806215237058, 1e-4 * 14626.8) << std::setprecision(17) << c.sum_sq;
}

TEST(StylePyramid, DeterministicAndFrozen) {
    md::StylePyramid a, b;
    sp::RgbImage img(40, 36);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<float>((i * 37) % 101) / 100.0f;
    const auto fa = md::extract_style_features(img, a);
    const auto fb = md::extract_style_features(img, b);
    EXPECT_EQ(fa.grid.to_vector(), fb.grid.to_vector());
    EXPECT_EQ(fa.grid.shape(), (sp::Shape{10 * 9, 128}));
    EXPECT_FALSE(fa.grid.requires_grad());
    EXPECT_EQ(fa.origins.size(), 2u * 90);
    EXPECT_THROW(md::extract_style_features(sp::RgbImage(31, 64), a), std::invalid_argument);
}

TEST(StylePyramid, ConstantImageGivesConstantInterior) {
    md::StylePyramid pyr;
    const auto f = md::extract_style_features(sp::RgbImage(64, 64, 0.3f), pyr);
    // Receptive field of the deepest level reaches 3 cells; skip a 2-cell
    // border.
    const auto c = static_cast<std::size_t>(f.grid.size(1));
    const auto *ref = &f.grid.data()[(2 * 16 + 2) * c];
    for (int y = 2; y < 14; ++y) {
        for (int x = 2; x < 14; ++x) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                EXPECT_NEAR(f.grid.data()[(static_cast<std::size_t>(y) * 16 + x) * c + ch], ref[ch], 1e-5);
            }
        }
    }
}

TEST(StylePyramid, GoldenChecksum) {
    md::StylePyramid pyr;
    sp::RgbImage img(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            for (int k = 0; k < 3; ++k) img.at(x, y, k) = 0.5f + 0.5f * std::sin(0.2f * x * (k + 1) + 0.3f * y);
    const auto c = checksum(md::extract_style_features(img, pyr).grid.data());
    EXPECT_NEAR(c.sum, 11103.3858743577, 1e-4 * 11103.4) << std::setprecision(17) << c.sum;
    EXPECT_NEAR(c.sum_sq, 12858.205931690198, 1e-4 * 12858.2) << std::setprecision(17) << c.sum_sq;
}

TEST(Stylizer, ConstantStyleCollapses) {
    std::mt19937 rng(6);
    md::StylizerConfig cfg{8, 16, 6, 16};
    md::ParamInit init(6);
    const auto p = md::StylizerParams::init(cfg, init);
    const auto content = random_tensor({10, 8}, rng, -1, 1, false);
    std::vector<float> v0{0.3f, -1.2f, 0.8f, 2.0f, 0.0f, -0.4f};
    std::vector<float> grid;
    for (int i = 0; i < 12; ++i) grid.insert(grid.end(), v0.begin(), v0.end());
    const auto style = Tensor::from({12, 6}, grid);
    const auto c = p.phi2(sp::ops::relu(p.phi1(content)));
    const auto t = md::adaattn(c, style, p.wq, p.wk, p.wv, cfg.attn_dim);
    const auto wv0 = sp::ops::matmul(Tensor::from({1, 6}, v0), p.wv).to_vector();
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t ch = 0; ch < 16; ++ch) {
            EXPECT_NEAR(t.mean.data()[i * 16 + ch], wv0[ch], 1e-5);
            // Rounding of the attention row sum leaves a tiny residual.
            EXPECT_NEAR(t.stddev.data()[i * 16 + ch], 0.0, 2e-3 * (1 + std::fabs(wv0[ch])));
        }
    }
}

TEST(Stylizer, SinglePointUsesMeanOnly) {
    std::mt19937 rng(7);
    md::StylizerConfig cfg{8, 16, 6, 16};
    md::ParamInit init(7);
    const auto p = md::StylizerParams::init(cfg, init);
    const auto content = random_tensor({1, 8}, rng, -1, 1, false);
    const auto style = random_tensor({9, 6}, rng, -1, 1, false);
    const auto out = md::stylize(content, style, p, cfg).to_vector();
    const auto c = p.phi2(sp::ops::relu(p.phi1(content)));
    const auto t = md::adaattn(c, style, p.wq, p.wk, p.wv, cfg.attn_dim);
    const auto want = p.psi2(sp::ops::relu(p.psi1(t.mean))).to_vector();
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_FLOAT_EQ(out[i], want[i]);
}

TEST(Stylizer, VarianceMatchesOracleAndRowsSumToOne) {
    std::mt19937 rng(8);
    const auto content = random_tensor({20, 5}, rng, -1, 1, false);
    const auto style = random_tensor({30, 4}, rng, -1, 1, false);
    const auto wq = random_tensor({5, 6}, rng, -1, 1, false);
    const auto wk = random_tensor({4, 6}, rng, -1, 1, false);
    const auto wv = random_tensor({4, 5}, rng, -1, 1, false);
    const auto t = md::adaattn(content, style, wq, wk, wv, 6);
    const auto a = t.attention.to_vector();
    for (std::size_t i = 0; i < 20; ++i) {
        double s = 0.0;
        for (std::size_t l = 0; l < 30; ++l) s += a[i * 30 + l];
        EXPECT_NEAR(s, 1.0, 1e-5);
    }
    const auto v = sp::ops::matmul(style, wv).to_vector();
    const auto var = sp::testing::oracle_weighted_variance(a, v, 20, 30, 5);
    for (std::size_t i = 0; i < var.size(); ++i) {
        const double s2 = static_cast<double>(t.stddev.data()[i]) * t.stddev.data()[i];
        EXPECT_GE(s2, 0.0);
        EXPECT_NEAR(s2, var[i], 1e-5);
    }
}

TEST(Stylizer, InvariantToStyleGridPermutation) {
    std::mt19937 rng(9);
    md::StylizerConfig cfg{8, 16, 6, 16};
    md::ParamInit init(9);
    const auto p = md::StylizerParams::init(cfg, init);
    const auto content = random_tensor({12, 8}, rng, -1, 1, false);
    const auto style = random_tensor({16, 6}, rng, -1, 1, false);
    std::vector<std::int64_t> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto a = md::stylize(content, style, p, cfg).to_vector();
    const auto b = md::stylize(content, sp::ops::gather(style, perm), p, cfg).to_vector();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-5);
}

TEST(Stylizer, GradientsMatchFiniteDifferences) {
    std::mt19937 rng(10);
    md::StylizerConfig cfg{6, 8, 5, 8};
    md::ParamInit init(10);
    const auto p = md::StylizerParams::init(cfg, init);
    auto content = random_tensor({16, 6}, rng);
    auto style = random_tensor({16, 5}, rng); // 4x4 grid
    auto w = weights_like(Tensor::zeros({16, 6}), rng);
    sp::model::ParamList list;
    p.collect("s", list);
    std::vector<Tensor> inputs{content, style};
    for (const auto &np : list.params) inputs.push_back(np.tensor);
    // ReLU and the clamp inside the std make a few probes straddle a kink;
    // those are skipped, but only a handful may be.
    const auto r = check_gradients([&] { return weighted(md::stylize(content, style, p, cfg), w); }, inputs,
                                   sp::testing::GradCheckOptions{1e-3, 1e-6, 0.01});
    EXPECT_LT(r.skipped_fraction(), 0.02);
    for (std::size_t i = 0; i < r.per_input.size(); ++i) {
        const std::string name = i < 2 ? (i == 0 ? "content" : "style") : list.params[i - 2].name;
        if (name == "s.phi2.bias") {
            // instance norm removes per-channel shifts, so the true gradient is 0
            for (float g : inputs[i].grad()) EXPECT_NEAR(g, 0.0f, 1e-5f);
            continue;
        }
        EXPECT_LE(r.per_input[i], 1e-3) << name;
    }
}

TEST(Stylizer, NonFiniteLogitsReported) {
    const auto content = Tensor::from({2, 2}, {1, 2, 3, 4});
    const auto style = Tensor::from({2, 2}, {1, 0, 0, 1});
    const auto huge = Tensor::full({2, 2}, 1e30f);
    try {
        md::adaattn(content, style, huge, huge, Tensor{}, 2);
        FAIL();
    } catch (const md::AttentionError &e) {
        EXPECT_NE(std::string(e.what()).find("max |logit|"), std::string::npos);
    }
}
