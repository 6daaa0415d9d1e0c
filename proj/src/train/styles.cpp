// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/train/styles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace stylepoint::train {

namespace {

using Color = std::array<float, 3>;

struct Rng {
    std::mt19937_64 gen;
    float operator()(float lo, float hi) { return std::uniform_real_distribution<float>(lo, hi)(gen); }
    Color color() {
        Color c;
        for (auto &v : c) v = (*this)(0.0f, 1.0f);
        return c;
    }
};

Color mix(const Color &a, const Color &b, float t) {
    return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

void put(RgbImage &img, int x, int y, const Color &c) {
    for (int k = 0; k < 3; ++k) img.at(x, y, k) = std::clamp(c[k], 0.0f, 1.0f);
}

float smooth(float t) { return t * t * (3.0f - 2.0f * t); }

// Value noise on a lattice with `cells` cells across.
struct Lattice {
    int n;
    std::vector<float> v;
    Lattice(int cells, Rng &u) : n(cells + 1), v(static_cast<std::size_t>(n * n)) {
        for (auto &x : v) x = u(0.0f, 1.0f);
    }
    float at(float x, float y) const {
        const int x0 = std::min(static_cast<int>(x), n - 2), y0 = std::min(static_cast<int>(y), n - 2);
        const float tx = smooth(x - x0), ty = smooth(y - y0);
        auto g = [&](int i, int j) { return v[static_cast<std::size_t>(j * n + i)]; };
        const float a = g(x0, y0) + (g(x0 + 1, y0) - g(x0, y0)) * tx;
        const float b = g(x0, y0 + 1) + (g(x0 + 1, y0 + 1) - g(x0, y0 + 1)) * tx;
        return a + (b - a) * ty;
    }
};

} // namespace

StyleKind parse_style_kind(const std::string &name) {
    if (name == "noise") return StyleKind::Noise;
    if (name == "stripes") return StyleKind::Stripes;
    if (name == "patches") return StyleKind::Patches;
    throw std::invalid_argument("unknown style kind '" + name + "' (expected noise, stripes or patches)");
}

RgbImage procedural_style(StyleKind kind, std::uint64_t seed, int width, int height) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("style image size must be positive");
    }
    Rng u{std::mt19937_64(seed * 7 + static_cast<std::uint64_t>(kind))};
    RgbImage img(width, height);
    const Color c0 = u.color(), c1 = u.color(), c2 = u.color();
    switch (kind) {
    case StyleKind::Noise: {
        const Lattice coarse(4, u), fine(12, u);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const float fx = static_cast<float>(x) / width, fy = static_cast<float>(y) / height;
                const float a = coarse.at(fx * 4, fy * 4), b = fine.at(fx * 12, fy * 12);
                put(img, x, y, mix(mix(c0, c1, a), c2, 0.5f * b));
            }
        }
        break;
    }
    case StyleKind::Stripes: {
        const float th = u(0.0f, std::numbers::pi_v<float>), period = u(5.0f, 14.0f);
        const float th2 = th + u(0.8f, 2.3f), period2 = u(10.0f, 24.0f);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const float s = 0.5f + 0.5f * std::sin(2.0f * std::numbers::pi_v<float> *
                                                       (x * std::cos(th) + y * std::sin(th)) / period);
                const float t = 0.5f + 0.5f * std::sin(2.0f * std::numbers::pi_v<float> *
                                                       (x * std::cos(th2) + y * std::sin(th2)) / period2);
                put(img, x, y, mix(mix(c0, c1, s), c2, 0.4f * t));
            }
        }
        break;
    }
    case StyleKind::Patches: {
        const int cell = static_cast<int>(u(6.0f, 14.0f));
        const int cols = (width + cell - 1) / cell, rows = (height + cell - 1) / cell;
        std::vector<Color> tiles;
        const Color palette[3] = {c0, c1, c2};
        for (int i = 0; i < cols * rows; ++i) {
            Color c = palette[static_cast<int>(u(0.0f, 2.999f))];
            for (auto &v : c) v += u(-0.12f, 0.12f);
            tiles.push_back(c);
        }
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) put(img, x, y, tiles[static_cast<std::size_t>((y / cell) * cols + x / cell)]);
        }
        break;
    }
    }
    return img;
}

std::vector<RgbImage> style_bank(int count, std::uint64_t seed, int size) {
    std::vector<RgbImage> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(procedural_style(static_cast<StyleKind>(i % 3), seed + static_cast<std::uint64_t>(i), size, size));
    }
    return out;
}

} // namespace stylepoint::train
