// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/model/encoder.hpp"

#include <stdexcept>
#include <string>

namespace stylepoint::model {

void EncoderConfig::validate() const {
    if (stages.empty()) {
        throw std::invalid_argument("encoder needs at least one stage");
    }
    int prev = 0;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto &s = stages[i];
        const std::string where = "encoder stage " + std::to_string(i) + ": ";
        if (s.layers < 1 || s.downsample < 1 || s.max_neighbors < 1 || !(s.radius > 0.0f)) {
            throw std::invalid_argument(where + "layers, downsample, K and radius must be positive");
        }
        if (s.channels <= prev) {
            throw std::invalid_argument(where + "channels must strictly increase");
        }
        prev = s.channels;
    }
    if (in_channels < 1) {
        throw std::invalid_argument("encoder input channels must be positive");
    }
}

std::int64_t EncoderConfig::min_points() const {
    std::int64_t n = 1;
    for (const auto &s : stages) {
        n *= s.downsample;
    }
    return n;
}

MrConvParams MrConvParams::init(std::int64_t in, std::int64_t out, ParamInit &init) {
    return {Linear::init(2 * in, out, init), BatchNorm::init(out)};
}

void MrConvParams::collect(const std::string &name, ParamList &out) const {
    linear.collect(name + ".linear", out);
    norm.collect(name + ".bn", out);
}

Tensor mr_conv(const Tensor &src, const Tensor &center, const pointcloud::NeighborGraph &graph,
               const MrConvParams &params, bool training) {
    if (center.dim() != 2 || 2 * center.size(1) != params.linear.in_features()) {
        throw ShapeError("mr_conv: features " + shape_str(center.shape()) + " do not match weight " +
                         shape_str(params.linear.weight.shape()));
    }
    if (graph.queries() != center.size(0)) {
        throw ShapeError("mr_conv: graph has " + std::to_string(graph.queries()) + " queries for " +
                         std::to_string(center.size(0)) + " points");
    }
    const Tensor rel = ops::max_relative(src, center, graph.offsets, graph.neighbors);
    return params.norm(ops::relu(params.linear(ops::concat({center, rel}, 1))), training);
}

EncoderParams EncoderParams::init(const EncoderConfig &cfg, ParamInit &init) {
    cfg.validate();
    EncoderParams p;
    std::int64_t in = cfg.in_channels;
    for (const auto &s : cfg.stages) {
        std::vector<MrConvParams> layers;
        for (int l = 0; l < s.layers; ++l) {
            layers.push_back(MrConvParams::init(l == 0 ? in : s.channels, s.channels, init));
        }
        p.stages.push_back(std::move(layers));
        p.shortcut.push_back(s.layers >= 2 ? Linear::init(in, s.channels, init) : Linear{});
        in = s.channels;
    }
    return p;
}

void EncoderParams::collect(const std::string &name, ParamList &out) const {
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const std::string stage = name + ".stage" + std::to_string(s);
        for (std::size_t l = 0; l < stages[s].size(); ++l) {
            stages[s][l].collect(stage + ".mrconv" + std::to_string(l), out);
        }
        if (shortcut[s].weight.defined()) {
            shortcut[s].collect(stage + ".shortcut", out);
        }
    }
}

EncoderGeometry build_encoder_geometry(std::span<const float> positions, const EncoderConfig &cfg) {
    cfg.validate();
    const auto n = static_cast<std::int64_t>(positions.size() / 3);
    if (n < cfg.min_points()) {
        throw std::invalid_argument("encoder needs at least " + std::to_string(cfg.min_points()) + " points, got " +
                                    std::to_string(n));
    }
    EncoderGeometry g;
    g.input_points = n;
    std::vector<float> prev(positions.begin(), positions.end());
    std::vector<std::int64_t> lineage(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        lineage[static_cast<std::size_t>(i)] = i;
    }
    for (const auto &s : cfg.stages) {
        EncoderGeometry::Level lv;
        const auto np = static_cast<std::int64_t>(prev.size() / 3);
        const auto m = (np + s.downsample - 1) / s.downsample;
        lv.pick = pointcloud::farthest_point_sample(prev, m).indices;
        for (auto i : lv.pick) {
            const auto k = static_cast<std::size_t>(i);
            lv.positions.insert(lv.positions.end(), prev.begin() + static_cast<std::ptrdiff_t>(k * 3),
                                prev.begin() + static_cast<std::ptrdiff_t>(k * 3 + 3));
            lv.lineage.push_back(lineage[k]);
        }
        lv.entry = pointcloud::ball_query(lv.positions, prev, s.radius, s.max_neighbors);
        if (s.layers > 1) {
            lv.within = pointcloud::ball_query(lv.positions, lv.positions, s.radius, s.max_neighbors);
        }
        prev = lv.positions;
        lineage = lv.lineage;
        g.levels.push_back(std::move(lv));
    }
    return g;
}

Tensor encoder_input(const ScenePointCloud &cloud) {
    const auto n = static_cast<std::int64_t>(cloud.size());
    std::vector<float> v(static_cast<std::size_t>(n * 6));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            v[i * 6 + static_cast<std::size_t>(k)] = cloud.colors[i * 3 + static_cast<std::size_t>(k)];
            v[i * 6 + 3 + static_cast<std::size_t>(k)] = cloud.positions[i * 3 + static_cast<std::size_t>(k)];
        }
    }
    return Tensor::from({n, 6}, std::move(v));
}

ContentFeatures encode(const Tensor &input, const EncoderGeometry &geometry, const EncoderConfig &cfg,
                       const EncoderParams &params, bool training) {
    if (input.dim() != 2 || input.size(0) != geometry.input_points || input.size(1) != cfg.in_channels) {
        throw ShapeError("encode: input " + shape_str(input.shape()) + " does not match " +
                         std::to_string(geometry.input_points) + " points of " + std::to_string(cfg.in_channels) +
                         " channels");
    }
    Tensor x = input;
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        const auto &lv = geometry.levels[s];
        const Tensor center = ops::gather(x, lv.pick);
        // Residual across each pair of layers; the first pair's skip is a
        // projection of the stage input.
        Tensor skip = params.shortcut[s].weight.defined() ? params.shortcut[s](center) : Tensor{};
        Tensor h = mr_conv(x, center, lv.entry, params.stages[s][0], training);
        for (std::size_t l = 1; l < params.stages[s].size(); ++l) {
            h = mr_conv(h, h, lv.within, params.stages[s][l], training);
            if (l % 2 == 1) {
                h = h + skip;
                skip = h;
            }
        }
        x = h;
    }
    const auto &last = geometry.levels.back();
    return {last.positions, x, last.lineage};
}

ContentFeatures encode(const ScenePointCloud &cloud, const EncoderConfig &cfg, const EncoderParams &params,
                       bool training) {
    const auto geometry = build_encoder_geometry(cloud.positions, cfg);
    return encode(encoder_input(cloud), geometry, cfg, params, training);
}

} // namespace stylepoint::model
