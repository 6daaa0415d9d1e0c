// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/model/encoder.hpp"
#include "stylepoint/model/stylizer.hpp"
#include "stylepoint/render/renderer.hpp"

#include <cstdint>
#include <string>

namespace stylepoint::train {

struct ModelConfig {
    model::EncoderConfig encoder;
    model::StylizerConfig stylizer;
    render::DecoderConfig decoder;
    model::PyramidConfig pyramid;
    render::RenderConfig render;
    std::uint64_t init_seed = 1;

    /// Channel widths of the architecture as published (256-wide).
    static ModelConfig full();
    /// Quarter-width variant that trains in minutes on one core.
    static ModelConfig desk();

    /// Throws std::invalid_argument when the parts do not fit together.
    void validate() const;
};

struct Model {
    ModelConfig config;
    model::EncoderParams encoder;
    model::StylizerParams stylizer;
    render::DecoderParams decoder;
    model::StylePyramid pyramid;

    static Model init(const ModelConfig &cfg);

    model::ParamList encoder_params() const;
    model::ParamList stylizer_params() const;
    model::ParamList decoder_params() const;
    model::ParamList all_params() const;
};

} // namespace stylepoint::train
