// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/model/stylizer.hpp"
#include "stylepoint/render/rasterizer.hpp"

#include <cstdint>
#include <vector>

namespace stylepoint::train {

/// Mean absolute difference.
Tensor l1_loss(const Tensor &a, const Tensor &b);

/// Sum over pyramid levels of the mean squared feature difference. The
/// target side is treated as a constant.
Tensor feature_loss(const model::StylePyramid &pyramid, const Tensor &rendered, const Tensor &target);

/// Bilinear samples of a [C,H,W] image at continuous positions (pixel
/// centers at +0.5, borders clamped) -> [M, C].
Tensor sample_bilinear(const Tensor &image, std::span<const float> xy);

struct ConsistencyTerm {
    Tensor loss;             // scalar
    std::int64_t triples = 0; // co-visible (point, view pair) count
};

/// Mean over co-visible (point, i < j) triples of the L1 distance between
/// the colors each view shows at the point's projection. Visibility comes
/// from the plans and carries no gradient. No co-visible triple gives 0.
ConsistencyTerm consistency_loss(const std::vector<const render::SplatPlan *> &plans,
                                 const std::vector<Tensor> &images);

/// Per-level channel mean and standard deviation of pyramid features.
struct FeatureStats {
    std::vector<Tensor> mean; // [C_l]
    std::vector<Tensor> stddev;
};
FeatureStats feature_stats(const std::vector<Tensor> &levels);

/// Sum over levels of the channel-averaged squared differences of means and
/// of standard deviations.
Tensor global_style_loss(const FeatureStats &rendered, const FeatureStats &style);

/// Parameter-free attention-weighted AdaIN of content pyramid features by
/// the style grid at the deepest level, [h*w, C]. A constant.
Tensor local_style_target(const Tensor &content_deepest, const Tensor &style_grid);

/// Mean squared difference of the rendered deepest level, flattened to
/// [h*w, C], from the target.
Tensor local_style_loss(const Tensor &rendered_deepest, const Tensor &target);

} // namespace stylepoint::train
