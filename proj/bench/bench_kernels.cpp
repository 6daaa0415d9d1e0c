// SPDX-License-Identifier: Apache-2.0
// Reference (serial) kernels against the default OpenMP versions. Pairs share
// inputs so the ratio of the two timings is the speedup.
#include "stylepoint/kernels/dense.hpp"
#include "stylepoint/kernels/sparse.hpp"
#include "stylepoint/pointcloud/kernels.hpp"
#include "stylepoint/render/rasterizer.hpp"
#include "stylepoint/train/scene.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace sp = stylepoint;
namespace pc = stylepoint::pointcloud;
namespace kn = stylepoint::kernels;

namespace {

std::vector<float> cube(std::int64_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<float> out(static_cast<std::size_t>(n) * 3);
    for (auto &v : out) v = u(rng);
    return out;
}

template <auto Fn> void fps(benchmark::State &state) {
    const auto pts = cube(state.range(0), 1);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(pts, state.range(0) / 4));
}

template <auto Fn> void ball(benchmark::State &state) {
    const auto src = cube(state.range(0), 2);
    const auto qry = cube(state.range(0) / 4, 3);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(qry, src, 0.2f, 16));
}

template <auto Fn> void idw(benchmark::State &state) {
    const auto src = cube(state.range(0) / 4, 4);
    const auto tgt = cube(state.range(0), 5);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(tgt, src, 3, 2.0f));
}

template <auto Fn> void gemm(benchmark::State &state) {
    const std::int64_t n = state.range(0);
    const auto a = cube(n * n / 3, 6), b = cube(n * n / 3, 7);
    std::vector<float> c(static_cast<std::size_t>(n * n));
    for (auto _ : state) {
        Fn(false, false, n, n, n, a.data(), b.data(), c.data(), false);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

template <auto Fn> void conv(benchmark::State &state) {
    kn::ConvGeometry g;
    g.in_channels = 32;
    g.out_channels = 32;
    g.in_h = g.in_w = state.range(0);
    const auto x = cube(g.in_channels * g.in_h * g.in_w / 3 + 1, 8);
    const auto w = cube(g.out_channels * g.in_channels * 9 / 3 + 1, 9);
    std::vector<float> y(static_cast<std::size_t>(g.out_channels * g.conv_out_h() * g.conv_out_w()));
    const std::span<const float> xs(x.data(), static_cast<std::size_t>(g.in_channels * g.in_h * g.in_w));
    const std::span<const float> ws(w.data(), static_cast<std::size_t>(g.out_channels * g.in_channels * 9));
    for (auto _ : state) {
        Fn(g, xs, ws, {}, y);
        benchmark::ClobberMemory();
    }
}

template <auto Fn> void splats(benchmark::State &state) {
    const auto scene = sp::train::SyntheticScene::generate(sp::train::SceneKind::Room, 1);
    const auto cloud = scene.point_cloud();
    const auto cam = scene.canonical.resized(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(cloud.positions, cloud.record, cam, {}));
}

template <auto Fn> void mix(benchmark::State &state) {
    const auto src = cube(state.range(0) / 4, 10);
    const auto tgt = cube(state.range(0), 11);
    const auto map = pc::idw_weights(tgt, src);
    const auto in = cube(state.range(0) / 4 * 64 / 3, 12);
    std::vector<float> out(static_cast<std::size_t>(state.range(0) * 64));
    for (auto _ : state) {
        Fn(map, 64, in, kn::Layout::ItemMajor, out, kn::Layout::ItemMajor);
        benchmark::ClobberMemory();
    }
}

} // namespace

BENCHMARK(fps<pc::reference::farthest_point_sample>)->Name("fps/reference")->Arg(4096)->Arg(16384);
BENCHMARK(fps<pc::farthest_point_sample>)->Name("fps/parallel")->Arg(4096)->Arg(16384);
BENCHMARK(ball<pc::reference::ball_query>)->Name("ball_query/reference")->Arg(4096)->Arg(16384);
BENCHMARK(ball<pc::ball_query>)->Name("ball_query/parallel")->Arg(4096)->Arg(16384);
BENCHMARK(idw<pc::reference::idw_weights>)->Name("idw/reference")->Arg(4096)->Arg(16384);
BENCHMARK(idw<pc::idw_weights>)->Name("idw/parallel")->Arg(4096)->Arg(16384);
BENCHMARK(gemm<kn::reference::gemm>)->Name("gemm/reference")->Arg(128)->Arg(256);
BENCHMARK(gemm<kn::gemm>)->Name("gemm/parallel")->Arg(128)->Arg(256);
BENCHMARK(conv<kn::reference::conv2d_forward>)->Name("conv2d/reference")->Arg(32)->Arg(64);
BENCHMARK(conv<kn::conv2d_forward>)->Name("conv2d/parallel")->Arg(32)->Arg(64);
BENCHMARK(splats<sp::render::reference::plan_splats>)->Name("plan_splats/reference")->Arg(64)->Arg(128);
BENCHMARK(splats<sp::render::plan_splats>)->Name("plan_splats/parallel")->Arg(64)->Arg(128);
BENCHMARK(mix<kn::reference::sparse_mix>)->Name("sparse_mix/reference")->Arg(4096)->Arg(16384);
BENCHMARK(mix<kn::sparse_mix>)->Name("sparse_mix/parallel")->Arg(4096)->Arg(16384);
BENCHMARK_MAIN();
