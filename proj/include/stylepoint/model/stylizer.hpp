// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/geometry/image.hpp"
#include "stylepoint/model/layers.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace stylepoint::model {

/// Frozen random conv pyramid used for style features and perceptual
/// losses: 3x3 convs with ReLU, stride 1 then stride 2 between levels,
/// orthogonal weights from a fixed seed.
struct PyramidConfig {
    std::vector<int> channels = {32, 64, 128};
    std::uint64_t seed = 20220101;
    int min_size = 32;
};

class StylePyramid {
  public:
    explicit StylePyramid(const PyramidConfig &cfg = {});

    /// [3,H,W] in [0,1] -> one [C_l, H_l, W_l] map per level. Differentiable
    /// in the image; the weights never require gradients.
    std::vector<Tensor> features(const Tensor &image) const;
    int levels() const { return static_cast<int>(convs_.size()); }
    const std::vector<Conv2d> &layers() const { return convs_; }
    int channels() const { return static_cast<int>(convs_.back().weight.size(0)); }
    /// Pixels of the input per step of the deepest level.
    int stride() const { return 1 << (levels() - 1); }
    const PyramidConfig &config() const { return cfg_; }

  private:
    PyramidConfig cfg_;
    std::vector<Conv2d> convs_;
};

/// Deepest pyramid level flattened to a grid of vectors.
struct StyleFeatures {
    Tensor grid;                // [H_s * W_s, C_s], row-major over the grid
    std::vector<float> origins; // per location: (x, y) pixel center in the style image
    int width = 0;
    int height = 0;
};

/// Throws std::invalid_argument for images smaller than the pyramid minimum.
StyleFeatures extract_style_features(const RgbImage &style, const StylePyramid &pyramid);

/// [C, H, W] -> [H*W, C].
Tensor flatten_grid(const Tensor &map);

struct StylizerConfig {
    int content_channels = 256;
    int hidden = 256;
    int style_channels = 128;
    int attn_dim = 256;
};

class AttentionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct StylizerParams {
    Linear phi1, phi2, psi1, psi2;
    Tensor wq; // [hidden, attn_dim]
    Tensor wk; // [style_channels, attn_dim]
    Tensor wv; // [style_channels, hidden]

    static StylizerParams init(const StylizerConfig &cfg, ParamInit &init);
    void collect(const std::string &name, ParamList &out) const;
};

struct AdaAttnTerms {
    Tensor attention; // [N, L], rows sum to 1
    Tensor mean;      // [N, C]
    Tensor stddev;    // [N, C]
    Tensor out;       // stddev * IN(content) + mean
};

/// Attention-weighted adaptive instance normalization of `content` [N, C]
/// by `style` [L, C_s]. Undefined projection matrices act as identities
/// (the parameter-free form used for loss targets). Logits are scaled by
/// 1/sqrt(scale_dim).
AdaAttnTerms adaattn(const Tensor &content, const Tensor &style, const Tensor &wq, const Tensor &wk,
                     const Tensor &wv, std::int64_t scale_dim);

/// psi(AdaAttN(phi(F_c), F_s)).
Tensor stylize(const Tensor &content, const Tensor &style_grid, const StylizerParams &params,
               const StylizerConfig &cfg);

} // namespace stylepoint::model
