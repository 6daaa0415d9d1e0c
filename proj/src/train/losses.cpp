// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/train/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stylepoint::train {

namespace {

constexpr float kStdEps = 1e-5f;

// Rows = sample positions, cols = pixels of a w x h image.
kernels::SparseMap bilinear_map(std::span<const float> xy, int w, int h) {
    kernels::SparseMap m;
    m.cols = static_cast<std::int64_t>(w) * h;
    for (std::size_t i = 0; i + 1 < xy.size(); i += 2) {
        for (const auto &t : render::bilinear_footprint(xy[i], xy[i + 1])) {
            if (t.weight <= 0.0f) continue;
            const int x = std::clamp(t.x, 0, w - 1), y = std::clamp(t.y, 0, h - 1);
            m.push(static_cast<std::int64_t>(y) * w + x, t.weight);
        }
        m.end_row();
    }
    return m;
}

} // namespace

Tensor l1_loss(const Tensor &a, const Tensor &b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("l1_loss: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    return ops::mean_all(ops::abs(a - b));
}

Tensor feature_loss(const model::StylePyramid &pyramid, const Tensor &rendered, const Tensor &target) {
    if (rendered.shape() != target.shape()) {
        throw ShapeError("feature_loss: " + shape_str(rendered.shape()) + " vs " + shape_str(target.shape()));
    }
    const auto fr = pyramid.features(rendered);
    const auto ft = pyramid.features(target.detach());
    Tensor total = Tensor::scalar(0.0f);
    for (std::size_t l = 0; l < fr.size(); ++l) {
        total = total + ops::mean_all(ops::square(fr[l] - ft[l].detach()));
    }
    return total;
}

Tensor sample_bilinear(const Tensor &image, std::span<const float> xy) {
    if (image.dim() != 3) {
        throw ShapeError("sample_bilinear expects [C,H,W], got " + shape_str(image.shape()));
    }
    const auto map = bilinear_map(xy, static_cast<int>(image.size(2)), static_cast<int>(image.size(1)));
    const auto c = image.size(0);
    return ops::sparse_mix(image, map, c, kernels::Layout::ChannelMajor, kernels::Layout::ItemMajor, {map.rows, c});
}

ConsistencyTerm consistency_loss(const std::vector<const render::SplatPlan *> &plans,
                                 const std::vector<Tensor> &images) {
    if (plans.size() < 2 || plans.size() != images.size()) {
        throw std::invalid_argument("consistency_loss needs at least 2 views with one image each, got " +
                                    std::to_string(plans.size()) + " plans and " + std::to_string(images.size()) +
                                    " images");
    }
    const auto n = plans[0]->points();
    for (std::size_t v = 0; v < plans.size(); ++v) {
        if (plans[v]->points() != n) {
            throw std::invalid_argument("consistency_loss: views cover different point counts");
        }
        const auto &s = images[v].shape();
        if (s.size() != 3 || s[1] != plans[v]->height || s[2] != plans[v]->width) {
            throw ShapeError("consistency_loss: image " + shape_str(s) + " does not match its view");
        }
    }
    ConsistencyTerm term;
    term.loss = Tensor::scalar(0.0f);
    for (std::size_t i = 0; i < plans.size(); ++i) {
        for (std::size_t j = i + 1; j < plans.size(); ++j) {
            std::vector<float> xi, xj;
            for (std::int64_t p = 0; p < n; ++p) {
                const auto q = static_cast<std::size_t>(p);
                if (!plans[i]->visible[q] || !plans[j]->visible[q]) continue;
                xi.insert(xi.end(), {plans[i]->pixel_xy[q * 2], plans[i]->pixel_xy[q * 2 + 1]});
                xj.insert(xj.end(), {plans[j]->pixel_xy[q * 2], plans[j]->pixel_xy[q * 2 + 1]});
            }
            if (xi.empty()) continue;
            term.triples += static_cast<std::int64_t>(xi.size() / 2);
            const Tensor a = sample_bilinear(images[i], xi);
            const Tensor b = sample_bilinear(images[j], xj);
            term.loss = term.loss + ops::sum_all(ops::abs(a - b));
        }
    }
    if (term.triples > 0) {
        term.loss = ops::scale(term.loss, 1.0f / static_cast<float>(term.triples));
    }
    return term;
}

FeatureStats feature_stats(const std::vector<Tensor> &levels) {
    FeatureStats s;
    for (const auto &f : levels) {
        if (f.dim() != 3) {
            throw ShapeError("feature_stats expects [C,H,W] levels, got " + shape_str(f.shape()));
        }
        const Tensor flat = ops::reshape(f, {f.size(0), f.size(1) * f.size(2)});
        s.mean.push_back(ops::mean(flat, 1));
        s.stddev.push_back(ops::sqrt(ops::add_scalar(ops::var(flat, 1), kStdEps)));
    }
    return s;
}

Tensor global_style_loss(const FeatureStats &rendered, const FeatureStats &style) {
    if (rendered.mean.size() != style.mean.size()) {
        throw std::invalid_argument("global_style_loss: level counts differ");
    }
    Tensor total = Tensor::scalar(0.0f);
    for (std::size_t l = 0; l < rendered.mean.size(); ++l) {
        total = total + ops::mean_all(ops::square(rendered.mean[l] - style.mean[l].detach())) +
                ops::mean_all(ops::square(rendered.stddev[l] - style.stddev[l].detach()));
    }
    return total;
}

Tensor local_style_target(const Tensor &content_deepest, const Tensor &style_grid) {
    const Tensor c = model::flatten_grid(content_deepest.detach());
    const auto t = model::adaattn(c, style_grid.detach(), Tensor{}, Tensor{}, Tensor{}, c.size(1));
    return t.out.detach();
}

Tensor local_style_loss(const Tensor &rendered_deepest, const Tensor &target) {
    const Tensor r = model::flatten_grid(rendered_deepest);
    if (r.shape() != target.shape()) {
        throw ShapeError("local_style_loss: " + shape_str(r.shape()) + " vs " + shape_str(target.shape()));
    }
    return ops::mean_all(ops::square(r - target));
}

} // namespace stylepoint::train
