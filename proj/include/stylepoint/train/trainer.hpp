// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/tensor/adam.hpp"
#include "stylepoint/train/losses.hpp"
#include "stylepoint/train/model.hpp"
#include "stylepoint/train/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylepoint::train {

class TrainingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct LossWeights {
    float rgb = 1.0f;
    float feat = 1.0f;
    float cns = 1.0f;
    float global = 1.0f;
    float local = 1.0f;
};

struct TrainConfig {
    int stage1_iterations = 2000;
    int stage2_iterations = 2000;
    int batch = 2;
    int views = 2;
    float stage1_lr = 1e-3f;
    float stage2_lr = 1e-3f;
    PoseRanges poses;
    LossWeights weights;
    int style_count = 9;
    std::uint64_t style_seed = 500;
    std::uint64_t seed = 7;

    void validate() const;
};

/// Scene prepared once for training: its cloud, encoder geometry and input.
struct TrainScene {
    SyntheticScene scene;
    ScenePointCloud cloud;
    model::EncoderGeometry geometry;
    Tensor input;

    static TrainScene prepare(const SyntheticScene &scene, const model::EncoderConfig &cfg);
};

/// Style image with its features precomputed through the frozen pyramid.
struct TrainStyle {
    RgbImage image;
    model::StyleFeatures features;
    FeatureStats stats;

    static TrainStyle prepare(const RgbImage &image, const model::StylePyramid &pyramid);
};

struct LossRecord {
    int stage = 1;
    std::int64_t iteration = 0;
    double total = 0, rgb = 0, feat = 0, cns = 0, global = 0, local = 0;
};

/// Model plus optimizer progress; everything needed to resume exactly.
struct TrainState {
    Model model;
    AdamState adam;
    int stage = 1;
    std::int64_t iteration = 0; // completed iterations of `stage`
};

using LossCallback = std::function<void(const LossRecord &)>;

/// Runs stage-1 iterations (view synthesis: encoder + decoder) until
/// `until` (default: the configured count) and returns their losses.
std::vector<LossRecord> train_stage1(TrainState &state, const std::vector<TrainScene> &scenes,
                                     const TrainConfig &cfg, const LossCallback &on_iteration = {},
                                     std::optional<std::int64_t> until = std::nullopt);

/// Stage 2 (stylizer + decoder, encoder frozen). Moves a finished stage-1
/// state into stage 2 with a fresh optimizer.
std::vector<LossRecord> train_stage2(TrainState &state, const std::vector<TrainScene> &scenes,
                                     const std::vector<TrainStyle> &styles, const TrainConfig &cfg,
                                     const LossCallback &on_iteration = {},
                                     std::optional<std::int64_t> until = std::nullopt);

/// Deterministic generator for one batch element of one iteration.
std::mt19937_64 iteration_rng(std::uint64_t seed, int stage, std::int64_t iteration, int element);

/// Content features of a scene in inference mode.
model::ContentFeatures content_features(const Model &m, const TrainScene &scene);
/// F_cs for inference.
Tensor stylized_features(const Model &m, const model::ContentFeatures &content, const model::StyleFeatures &style);

// Checkpoints: parameters, batch-norm statistics, Adam moments and progress.
model::ParamList checkpoint_entries(const Model &m);
void save_checkpoint(const std::filesystem::path &path, const TrainState &state);
/// `state.model` must already have the architecture of the checkpoint.
void load_checkpoint(const std::filesystem::path &path, TrainState &state);

void write_loss_csv(const std::filesystem::path &path, const std::vector<LossRecord> &log);

} // namespace stylepoint::train
