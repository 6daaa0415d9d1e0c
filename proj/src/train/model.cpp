// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/train/model.hpp"

#include <stdexcept>

namespace stylepoint::train {

ModelConfig ModelConfig::full() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
    ModelConfig c;
    for (auto &s : c.encoder.stages) s.channels /= 4;
    c.stylizer = {64, 64, 128, 64};
    c.decoder.channels = 64;
    return c;
}

void ModelConfig::validate() const {
    encoder.validate();
    decoder.validate();
    if (stylizer.content_channels != encoder.out_channels() || decoder.channels != encoder.out_channels()) {
        throw std::invalid_argument("model: encoder output (" + std::to_string(encoder.out_channels()) +
                                    "), stylizer content (" + std::to_string(stylizer.content_channels) +
                                    ") and decoder input (" + std::to_string(decoder.channels) +
                                    ") channels must agree");
    }
    if (pyramid.channels.empty() || stylizer.style_channels != pyramid.channels.back()) {
        throw std::invalid_argument("model: stylizer style channels must equal the deepest pyramid level");
    }
}

Model Model::init(const ModelConfig &cfg) {
    cfg.validate();
    Model m{cfg, {}, {}, {}, model::StylePyramid(cfg.pyramid)};
    model::ParamInit init(cfg.init_seed);
    m.encoder = model::EncoderParams::init(cfg.encoder, init);
    m.stylizer = model::StylizerParams::init(cfg.stylizer, init);
    m.decoder = render::DecoderParams::init(cfg.decoder, init);
    return m;
}

model::ParamList Model::encoder_params() const {
    model::ParamList l;
    encoder.collect("encoder", l);
    return l;
}

model::ParamList Model::stylizer_params() const {
    model::ParamList l;
    stylizer.collect("stylizer", l);
    return l;
}

model::ParamList Model::decoder_params() const {
    model::ParamList l;
    decoder.collect("decoder", l);
    return l;
}

model::ParamList Model::all_params() const {
    auto l = encoder_params();
    l.append(stylizer_params());
    l.append(decoder_params());
    return l;
}

} // namespace stylepoint::train
