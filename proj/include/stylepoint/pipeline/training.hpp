// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/pipeline/config.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace stylepoint::pipeline {

struct TrainOutcome {
    std::filesystem::path stage1_checkpoint, checkpoint, loss_log;
    std::vector<train::LossRecord> log;
    double seconds = 0.0;
};

/// Both stages on the configured scenes (or only the first one with `smoke`,
/// on the short schedule). Writes stage1.spck, final.spck and losses.csv
/// into cfg.out.
TrainOutcome run_training(const PipelineConfig &cfg, bool smoke, const train::LossCallback &progress = {});

} // namespace stylepoint::pipeline
