// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/pipeline/training.hpp"

#include "stylepoint/train/styles.hpp"

#include <chrono>

namespace stylepoint::pipeline {

TrainOutcome run_training(const PipelineConfig &cfg, bool smoke, const train::LossCallback &progress) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto tc = smoke ? smoke_schedule(cfg.train) : cfg.train;
    auto mc = cfg.model_config();
    mc.init_seed = tc.seed;
    std::vector<train::TrainScene> scenes;
    for (const auto &ref : cfg.train_scenes) {
        scenes.push_back(train::TrainScene::prepare(train::SyntheticScene::generate(ref.kind, ref.seed), mc.encoder));
        if (smoke) break;
    }
    std::vector<train::TrainStyle> styles;
    const model::StylePyramid pyramid(mc.pyramid);
    for (const auto &img : train::style_bank(tc.style_count, tc.style_seed)) {
        styles.push_back(train::TrainStyle::prepare(img, pyramid));
    }

    std::filesystem::create_directories(cfg.out);
    TrainOutcome out;
    out.stage1_checkpoint = cfg.out / "stage1.spck";
    out.checkpoint = cfg.out / "final.spck";
    out.loss_log = cfg.out / "losses.csv";

    mc.validate();
    train::TrainState state{train::Model::init(mc), {}};
    out.log = train::train_stage1(state, scenes, tc, progress);
    train::save_checkpoint(out.stage1_checkpoint, state);
    const auto s2 = train::train_stage2(state, scenes, styles, tc, progress);
    out.log.insert(out.log.end(), s2.begin(), s2.end());
    train::save_checkpoint(out.checkpoint, state);
    train::write_loss_csv(out.loss_log, out.log);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

} // namespace stylepoint::pipeline
