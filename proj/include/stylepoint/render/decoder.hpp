// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/model/layers.hpp"

#include <cstdint>
#include <string>

namespace stylepoint::render {

/// Three-level U-Net from a C-channel feature map to RGB.
///
///   e1 = lrelu(conv3x3/2 C->C)(x)            H/2
///   e2 = lrelu(conv3x3/2 C->C)(e1)           H/4
///   d1 = relu(conv3x3(up(e2) + skip(e1)))    H/2, C/2
///   d2 = relu(conv3x3(up(d1) + skip(x)))     H,   C/4
///   rgb = sigmoid(conv3x3 C/4->3)(d2)
struct DecoderConfig {
    int channels = 256;
    float leaky_slope = 0.2f;

    void validate() const;
};

struct DecoderParams {
    model::Conv2d down1, down2;
    model::ConvTranspose2d up1, up2;
    model::Conv2d skip1, skip2; // 1x1
    model::Conv2d fuse1, fuse2;
    model::Conv2d to_rgb;
    DecoderConfig config;

    static DecoderParams init(const DecoderConfig &cfg, model::ParamInit &init);
    void collect(const std::string &name, model::ParamList &out) const;
};

/// [C, H, W] -> [3, H, W] in (0, 1). H and W must be multiples of 4.
Tensor decode(const Tensor &features, const DecoderParams &params);

} // namespace stylepoint::render
