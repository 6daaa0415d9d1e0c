// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/model/stylizer.hpp"

#include <cmath>
#include <string>

namespace stylepoint::model {

StylePyramid::StylePyramid(const PyramidConfig &cfg) : cfg_(cfg) {
    if (cfg.channels.empty()) {
        throw std::invalid_argument("style pyramid needs at least one level");
    }
    ParamInit init(cfg.seed);
    std::int64_t in = 3;
    for (std::size_t l = 0; l < cfg.channels.size(); ++l) {
        const std::int64_t out = cfg.channels[l];
        Conv2d c;
        c.weight = Tensor::from({out, in, 3, 3}, init.orthogonal(out, in * 9, std::sqrt(2.0f)));
        c.bias = Tensor::zeros({out});
        c.stride = l == 0 ? 1 : 2;
        c.pad = 1;
        convs_.push_back(std::move(c));
        in = out;
    }
}

std::vector<Tensor> StylePyramid::features(const Tensor &image) const {
    if (image.dim() != 3 || image.size(0) != 3) {
        throw ShapeError("style pyramid expects [3,H,W], got " + shape_str(image.shape()));
    }
    std::vector<Tensor> out;
    Tensor x = ops::add_scalar(ops::scale(image, 2.0f), -1.0f);
    for (const auto &c : convs_) {
        x = ops::relu(c(x));
        out.push_back(x);
    }
    return out;
}

Tensor flatten_grid(const Tensor &map) {
    if (map.dim() != 3) {
        throw ShapeError("flatten_grid expects [C,H,W], got " + shape_str(map.shape()));
    }
    return ops::transpose(ops::reshape(map, {map.size(0), map.size(1) * map.size(2)}));
}

StyleFeatures extract_style_features(const RgbImage &style, const StylePyramid &pyramid) {
    const int need = pyramid.config().min_size;
    if (style.width < need || style.height < need) {
        throw std::invalid_argument("style image is " + std::to_string(style.width) + "x" +
                                    std::to_string(style.height) + ", needs at least " + std::to_string(need) +
                                    "x" + std::to_string(need));
    }
    const Tensor image = Tensor::from({3, style.height, style.width}, style.to_planar());
    const Tensor deepest = pyramid.features(image).back();
    StyleFeatures f;
    f.height = static_cast<int>(deepest.size(1));
    f.width = static_cast<int>(deepest.size(2));
    f.grid = flatten_grid(deepest);
    const int s = pyramid.stride();
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) {
            f.origins.push_back(static_cast<float>(x * s) + 0.5f);
            f.origins.push_back(static_cast<float>(y * s) + 0.5f);
        }
    }
    return f;
}

StylizerParams StylizerParams::init(const StylizerConfig &cfg, ParamInit &init) {
    StylizerParams p;
    p.phi1 = Linear::init(cfg.content_channels, cfg.hidden, init);
    p.phi2 = Linear::init(cfg.hidden, cfg.hidden, init);
    p.wq = init.uniform({cfg.hidden, cfg.attn_dim}, std::sqrt(3.0f / static_cast<float>(cfg.hidden)));
    p.wk = init.uniform({cfg.style_channels, cfg.attn_dim}, std::sqrt(3.0f / static_cast<float>(cfg.style_channels)));
    p.wv = init.uniform({cfg.style_channels, cfg.hidden}, std::sqrt(3.0f / static_cast<float>(cfg.style_channels)));
    p.psi1 = Linear::init(cfg.hidden, cfg.hidden, init);
    p.psi2 = Linear::init(cfg.hidden, cfg.content_channels, init);
    return p;
}

void StylizerParams::collect(const std::string &name, ParamList &out) const {
    phi1.collect(name + ".phi1", out);
    phi2.collect(name + ".phi2", out);
    out.add_param(name + ".wq", wq);
    out.add_param(name + ".wk", wk);
    out.add_param(name + ".wv", wv);
    psi1.collect(name + ".psi1", out);
    psi2.collect(name + ".psi2", out);
}

AdaAttnTerms adaattn(const Tensor &content, const Tensor &style, const Tensor &wq, const Tensor &wk,
                     const Tensor &wv, std::int64_t scale_dim) {
    if (content.dim() != 2 || style.dim() != 2) {
        throw ShapeError("adaattn: content " + shape_str(content.shape()) + " and style " +
                         shape_str(style.shape()) + " must be 2-D");
    }
    const Tensor cn = ops::instance_norm(content, 0);
    const Tensor sn = ops::instance_norm(style, 0);
    const Tensor q = wq.defined() ? ops::matmul(cn, wq) : cn;
    const Tensor k = wk.defined() ? ops::matmul(sn, wk) : sn;
    const Tensor v = wv.defined() ? ops::matmul(style, wv) : style;
    if (q.size(1) != k.size(1) || v.size(1) != content.size(1)) {
        throw ShapeError("adaattn: query " + shape_str(q.shape()) + ", key " + shape_str(k.shape()) + ", value " +
                         shape_str(v.shape()) + " do not line up with content " + shape_str(content.shape()));
    }
    const Tensor logits =
        ops::scale(ops::matmul(q, ops::transpose(k)), 1.0f / std::sqrt(static_cast<float>(scale_dim)));
    float worst = 0.0f;
    bool finite = true;
    for (float l : logits.data()) {
        finite = finite && std::isfinite(l);
        worst = std::max(worst, std::fabs(l));
    }
    if (!finite) {
        throw AttentionError("attention logits are not finite (max |logit| = " + std::to_string(worst) + ")");
    }
    AdaAttnTerms t;
    t.attention = ops::softmax(logits, 1);
    t.mean = ops::matmul(t.attention, v);
    const Tensor second = ops::matmul(t.attention, ops::square(v));
    t.stddev = ops::sqrt(ops::clamp_min(second - ops::square(t.mean), 0.0f));
    t.out = t.stddev * cn + t.mean;
    return t;
}

Tensor stylize(const Tensor &content, const Tensor &style_grid, const StylizerParams &params,
               const StylizerConfig &cfg) {
    if (content.dim() != 2 || content.size(1) != cfg.content_channels) {
        throw ShapeError("stylize: content " + shape_str(content.shape()) + " does not have " +
                         std::to_string(cfg.content_channels) + " channels");
    }
    const Tensor c = params.phi2(ops::relu(params.phi1(content)));
    const auto t = adaattn(c, style_grid, params.wq, params.wk, params.wv, cfg.attn_dim);
    return params.psi2(ops::relu(params.psi1(t.out)));
}

} // namespace stylepoint::model
