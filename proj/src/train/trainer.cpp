// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/train/trainer.hpp"

#include "stylepoint/tensor/tape.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace stylepoint::train {

namespace {

Tensor image_tensor(const RgbImage &img) { return Tensor::from({3, img.height, img.width}, img.to_planar()); }

void zero_grads(const model::ParamList &list) {
    for (const auto &p : list.params) p.tensor.impl_ptr()->grad.clear();
}

std::string describe(const LossRecord &r) {
    std::ostringstream os;
    os << "stage " << r.stage << " iteration " << r.iteration << ": total=" << r.total << " rgb=" << r.rgb
       << " feat=" << r.feat << " cns=" << r.cns << " global=" << r.global << " local=" << r.local;
    return os.str();
}

// Backward + Adam with diagnostics on failure.
void step(const Tensor &total, Tape &tape, const model::ParamList &trainable, TrainState &state, float lr,
          const LossRecord &rec) {
    if (!std::isfinite(rec.total)) {
        throw TrainingError("non-finite loss at " + describe(rec));
    }
    tape.backward(total);
    try {
        adam_step(trainable.params, state.adam, AdamConfig{lr});
    } catch (const NonFiniteGradient &e) {
        throw TrainingError(std::string(e.what()) + " at " + describe(rec));
    }
}

struct ViewBatch {
    std::vector<CameraSpec> cameras;
    std::vector<render::SplatPlan> plans;
    std::vector<RgbImage> targets;
};

ViewBatch sample_batch_views(const TrainScene &sc, const TrainConfig &cfg, const render::RasterConfig &raster,
                             std::mt19937_64 &rng) {
    ViewBatch vb;
    for (int v = 0; v < cfg.views; ++v) {
        const auto cam = sample_view(sc.scene.canonical, cfg.poses, rng);
        vb.cameras.push_back(cam);
        vb.plans.push_back(render::plan_splats(sc.cloud.positions, sc.cloud.record, cam, raster));
        vb.targets.push_back(sc.scene.render(cam).image);
    }
    return vb;
}

// L_cns over the rendered views of one batch element.
Tensor cns_term(const ViewBatch &vb, const std::vector<Tensor> &images, double &acc) {
    std::vector<const render::SplatPlan *> ptrs;
    for (const auto &p : vb.plans) ptrs.push_back(&p);
    const auto t = consistency_loss(ptrs, images);
    acc += t.loss.item();
    return t.loss;
}

} // namespace

void TrainConfig::validate() const {
    if (stage1_iterations < 0 || stage2_iterations < 0 || batch < 1 || views < 1 || style_count < 1) {
        throw std::invalid_argument("train config: iteration counts must be >= 0 and batch, views, style_count >= 1");
    }
    if (!(stage1_lr > 0.0f) || !(stage2_lr > 0.0f)) {
        throw std::invalid_argument("train config: learning rates must be positive");
    }
    if (weights.cns > 0.0f && views < 2) {
        throw std::invalid_argument("train config: the consistency term needs views >= 2");
    }
}

TrainScene TrainScene::prepare(const SyntheticScene &scene, const model::EncoderConfig &cfg) {
    TrainScene t;
    t.scene = scene;
    t.cloud = scene.point_cloud();
    t.geometry = model::build_encoder_geometry(t.cloud.positions, cfg);
    t.input = model::encoder_input(t.cloud);
    return t;
}

TrainStyle TrainStyle::prepare(const RgbImage &image, const model::StylePyramid &pyramid) {
    TrainStyle s;
    s.image = image;
    s.features = model::extract_style_features(image, pyramid);
    s.stats = feature_stats(pyramid.features(image_tensor(image)));
    return s;
}

std::mt19937_64 iteration_rng(std::uint64_t seed, int stage, std::int64_t iteration, int element) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stage), static_cast<std::uint32_t>(iteration),
                      static_cast<std::uint32_t>(iteration >> 32), static_cast<std::uint32_t>(element)};
    return std::mt19937_64(seq);
}

model::ContentFeatures content_features(const Model &m, const TrainScene &scene) {
    return model::encode(scene.input, scene.geometry, m.config.encoder, m.encoder, false);
}

Tensor stylized_features(const Model &m, const model::ContentFeatures &content, const model::StyleFeatures &style) {
    return model::stylize(content.features, style.grid, m.stylizer, m.config.stylizer);
}

std::vector<LossRecord> train_stage1(TrainState &state, const std::vector<TrainScene> &scenes,
                                     const TrainConfig &cfg, const LossCallback &on_iteration,
                                     std::optional<std::int64_t> until) {
    cfg.validate();
    if (scenes.empty()) throw std::invalid_argument("train_stage1: no scenes");
    if (state.stage != 1) throw TrainingError("train_stage1: state is already in stage " + std::to_string(state.stage));
    Model &m = state.model;
    auto trainable = m.encoder_params();
    trainable.append(m.decoder_params());
    const auto &rc = m.config.render;
    const std::int64_t end = until.value_or(cfg.stage1_iterations);
    std::vector<LossRecord> log;
    for (; state.iteration < end; ++state.iteration) {
        zero_grads(trainable);
        Tape tape;
        TapeScope scope(tape);
        LossRecord rec{1, state.iteration};
        Tensor total = Tensor::scalar(0.0f);
        for (int b = 0; b < cfg.batch; ++b) {
            auto rng = iteration_rng(cfg.seed, 1, state.iteration, b);
            const auto &sc = scenes[rng() % scenes.size()];
            const auto content = model::encode(sc.input, sc.geometry, m.config.encoder, m.encoder, true);
            const auto vb = sample_batch_views(sc, cfg, rc.raster, rng);
            std::vector<Tensor> images;
            Tensor rgb = Tensor::scalar(0.0f), feat = Tensor::scalar(0.0f);
            for (int v = 0; v < cfg.views; ++v) {
                const auto k = static_cast<std::size_t>(v);
                const auto rv = render::render_view(sc.cloud, content.positions, content.features, vb.cameras[k],
                                                    m.decoder, rc, &vb.plans[k]);
                const Tensor gt = image_tensor(vb.targets[k]);
                rgb = rgb + l1_loss(rv.image, gt);
                feat = feat + feature_loss(m.pyramid, rv.image, gt);
                images.push_back(rv.image);
            }
            const float inv_v = 1.0f / static_cast<float>(cfg.views);
            rec.rgb += rgb.item() * inv_v;
            rec.feat += feat.item() * inv_v;
            Tensor elem = ops::scale(rgb, cfg.weights.rgb * inv_v) + ops::scale(feat, cfg.weights.feat * inv_v);
            if (cfg.weights.cns > 0.0f) {
                elem = elem + ops::scale(cns_term(vb, images, rec.cns), cfg.weights.cns);
            }
            total = total + elem;
        }
        const float inv_b = 1.0f / static_cast<float>(cfg.batch);
        total = ops::scale(total, inv_b);
        rec.rgb *= inv_b;
        rec.feat *= inv_b;
        rec.cns *= inv_b;
        rec.total = total.item();
        step(total, tape, trainable, state, cfg.stage1_lr, rec);
        log.push_back(rec);
        if (on_iteration) on_iteration(rec);
    }
    return log;
}

std::vector<LossRecord> train_stage2(TrainState &state, const std::vector<TrainScene> &scenes,
                                     const std::vector<TrainStyle> &styles, const TrainConfig &cfg,
                                     const LossCallback &on_iteration, std::optional<std::int64_t> until) {
    cfg.validate();
    if (scenes.empty() || styles.empty()) throw std::invalid_argument("train_stage2: needs scenes and styles");
    if (state.stage == 1) {
        if (state.iteration < cfg.stage1_iterations) {
            throw TrainingError("train_stage2: stage 1 has run " + std::to_string(state.iteration) + " of " +
                                std::to_string(cfg.stage1_iterations) + " iterations");
        }
        state.stage = 2;
        state.iteration = 0;
        state.adam = AdamState{};
    }
    Model &m = state.model;
    auto trainable = m.stylizer_params();
    trainable.append(m.decoder_params());
    const auto &rc = m.config.render;
    // The encoder is frozen: content features are constants of the scene.
    std::vector<model::ContentFeatures> contents;
    for (const auto &sc : scenes) contents.push_back(content_features(m, sc));
    const std::int64_t end = until.value_or(cfg.stage2_iterations);
    std::vector<LossRecord> log;
    for (; state.iteration < end; ++state.iteration) {
        zero_grads(trainable);
        Tape tape;
        TapeScope scope(tape);
        LossRecord rec{2, state.iteration};
        Tensor total = Tensor::scalar(0.0f);
        for (int b = 0; b < cfg.batch; ++b) {
            auto rng = iteration_rng(cfg.seed, 2, state.iteration, b);
            const auto si = rng() % scenes.size();
            const auto &sc = scenes[si];
            const auto &style = styles[rng() % styles.size()];
            const Tensor fcs = stylized_features(m, contents[si], style.features);
            const auto vb = sample_batch_views(sc, cfg, rc.raster, rng);
            std::vector<Tensor> images;
            Tensor global = Tensor::scalar(0.0f), local = Tensor::scalar(0.0f);
            for (int v = 0; v < cfg.views; ++v) {
                const auto k = static_cast<std::size_t>(v);
                const auto rv = render::render_view(sc.cloud, contents[si].positions, fcs, vb.cameras[k], m.decoder,
                                                    rc, &vb.plans[k]);
                const auto levels = m.pyramid.features(rv.image);
                global = global + global_style_loss(feature_stats(levels), style.stats);
                const auto content_levels = m.pyramid.features(image_tensor(vb.targets[k]));
                const Tensor target = local_style_target(content_levels.back(), style.features.grid);
                local = local + local_style_loss(levels.back(), target);
                images.push_back(rv.image);
            }
            const float inv_v = 1.0f / static_cast<float>(cfg.views);
            rec.global += global.item() * inv_v;
            rec.local += local.item() * inv_v;
            Tensor elem =
                ops::scale(global, cfg.weights.global * inv_v) + ops::scale(local, cfg.weights.local * inv_v);
            if (cfg.weights.cns > 0.0f) {
                elem = elem + ops::scale(cns_term(vb, images, rec.cns), cfg.weights.cns);
            }
            total = total + elem;
        }
        const float inv_b = 1.0f / static_cast<float>(cfg.batch);
        total = ops::scale(total, inv_b);
        rec.global *= inv_b;
        rec.local *= inv_b;
        rec.cns *= inv_b;
        rec.total = total.item();
        step(total, tape, trainable, state, cfg.stage2_lr, rec);
        log.push_back(rec);
        if (on_iteration) on_iteration(rec);
    }
    return log;
}

model::ParamList checkpoint_entries(const Model &m) { return m.all_params(); }

void save_checkpoint(const std::filesystem::path &path, const TrainState &state) {
    Archive a = model::to_archive(checkpoint_entries(state.model), "model.");
    for (const auto &[name, v] : state.adam.m) {
        a["adam.m." + name] = Tensor::from({static_cast<std::int64_t>(v.size())}, v);
    }
    for (const auto &[name, v] : state.adam.v) {
        a["adam.v." + name] = Tensor::from({static_cast<std::int64_t>(v.size())}, v);
    }
    // Counters are small enough to be exact in float32.
    a["train.adam_step"] = Tensor::scalar(static_cast<float>(state.adam.step));
    a["train.stage"] = Tensor::scalar(static_cast<float>(state.stage));
    a["train.iteration"] = Tensor::scalar(static_cast<float>(state.iteration));
    save_archive(path, a);
}

void load_checkpoint(const std::filesystem::path &path, TrainState &state) {
    const Archive a = load_archive(path);
    model::load_from_archive(checkpoint_entries(state.model), a, "model.");
    auto counter = [&](const std::string &key) {
        const auto it = a.find(key);
        if (it == a.end()) throw ArchiveError("checkpoint " + path.string() + " has no " + key);
        return static_cast<std::int64_t>(it->second.item());
    };
    state.adam = AdamState{};
    state.adam.step = counter("train.adam_step");
    state.stage = static_cast<int>(counter("train.stage"));
    state.iteration = counter("train.iteration");
    for (const auto &[key, t] : a) {
        if (key.rfind("adam.m.", 0) == 0) state.adam.m[key.substr(7)] = t.to_vector();
        if (key.rfind("adam.v.", 0) == 0) state.adam.v[key.substr(7)] = t.to_vector();
    }
}

void write_loss_csv(const std::filesystem::path &path, const std::vector<LossRecord> &log) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "stage,iteration,total,rgb,feat,cns,global,local\n" << std::setprecision(9);
    for (const auto &r : log) {
        os << r.stage << ',' << r.iteration << ',' << r.total << ',' << r.rgb << ',' << r.feat << ',' << r.cns << ','
           << r.global << ',' << r.local << '\n';
    }
}

} // namespace stylepoint::train
