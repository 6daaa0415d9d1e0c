// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace stylepoint {

/// Interleaved RGB image, row-major, channel values in [0,1].
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<float> rgb; // height * width * 3

    RgbImage() = default;
    RgbImage(int w, int h, float fill = 0.0f) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    float &at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    /// Planar [3, H, W] copy, the layout the network consumes.
    std::vector<float> to_planar() const;
    static RgbImage from_planar(int width, int height, std::span<const float> planar);
};

/// Rounds to 8-bit with clamping to [0,1].
std::uint8_t to_byte(float v);

std::vector<std::uint8_t> encode_png(const RgbImage &image);
RgbImage decode_png(std::span<const std::uint8_t> bytes);
void write_png(const std::filesystem::path &path, const RgbImage &image);
RgbImage read_png(const std::filesystem::path &path);

/// Bilinear resize to the requested size (used to fit style images).
RgbImage resize_bilinear(const RgbImage &image, int width, int height);

} // namespace stylepoint
