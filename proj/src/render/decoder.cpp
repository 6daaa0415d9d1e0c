// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/render/decoder.hpp"

#include <stdexcept>

namespace stylepoint::render {

void DecoderConfig::validate() const {
    if (channels < 4 || channels % 4 != 0) {
        throw std::invalid_argument("decoder channels must be a positive multiple of 4, got " +
                                    std::to_string(channels));
    }
}

DecoderParams DecoderParams::init(const DecoderConfig &cfg, model::ParamInit &init) {
    cfg.validate();
    const std::int64_t c = cfg.channels;
    DecoderParams p;
    p.config = cfg;
    p.down1 = model::Conv2d::init(c, c, 3, 2, init);
    p.down2 = model::Conv2d::init(c, c, 3, 2, init);
    p.up1 = model::ConvTranspose2d::init(c, c / 2, init);
    p.skip1 = model::Conv2d::init(c, c / 2, 1, 1, init);
    p.fuse1 = model::Conv2d::init(c / 2, c / 2, 3, 1, init);
    p.up2 = model::ConvTranspose2d::init(c / 2, c / 4, init);
    p.skip2 = model::Conv2d::init(c, c / 4, 1, 1, init);
    p.fuse2 = model::Conv2d::init(c / 4, c / 4, 3, 1, init);
    p.to_rgb = model::Conv2d::init(c / 4, 3, 3, 1, init);
    return p;
}

void DecoderParams::collect(const std::string &name, model::ParamList &out) const {
    down1.collect(name + ".down1", out);
    down2.collect(name + ".down2", out);
    up1.collect(name + ".up1", out);
    skip1.collect(name + ".skip1", out);
    fuse1.collect(name + ".fuse1", out);
    up2.collect(name + ".up2", out);
    skip2.collect(name + ".skip2", out);
    fuse2.collect(name + ".fuse2", out);
    to_rgb.collect(name + ".to_rgb", out);
}

Tensor decode(const Tensor &features, const DecoderParams &params) {
    const auto c = params.config.channels;
    if (features.dim() != 3 || features.size(0) != c) {
        throw ShapeError("decode: expected [" + std::to_string(c) + ",H,W], got " + shape_str(features.shape()));
    }
    if (features.size(1) % 4 != 0 || features.size(2) % 4 != 0) {
        throw ShapeError("decode: spatial size " + shape_str(features.shape()) + " is not a multiple of 4");
    }
    const float slope = params.config.leaky_slope;
    const Tensor e1 = ops::leaky_relu(params.down1(features), slope);
    const Tensor e2 = ops::leaky_relu(params.down2(e1), slope);
    const Tensor d1 = ops::relu(params.fuse1(params.up1(e2) + params.skip1(e1)));
    const Tensor d2 = ops::relu(params.fuse2(params.up2(d1) + params.skip2(features)));
    return ops::sigmoid(params.to_rgb(d2));
}

} // namespace stylepoint::render
