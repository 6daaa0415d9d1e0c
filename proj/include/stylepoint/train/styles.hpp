// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/geometry/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Procedural style images: value noise, stripes and color-jittered patches.
namespace stylepoint::train {

enum class StyleKind { Noise, Stripes, Patches };

StyleKind parse_style_kind(const std::string &name);

RgbImage procedural_style(StyleKind kind, std::uint64_t seed, int width, int height);

/// `count` styles cycling through the kinds, seeded from `seed`.
std::vector<RgbImage> style_bank(int count, std::uint64_t seed, int size = 64);

} // namespace stylepoint::train
