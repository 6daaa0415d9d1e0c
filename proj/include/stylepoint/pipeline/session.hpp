// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/eval/metrics.hpp"
#include "stylepoint/pipeline/config.hpp"
#include "stylepoint/render/renderer.hpp"
#include "stylepoint/train/model.hpp"

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

namespace stylepoint::pipeline {

// Scene files as written by make-scene: image.png, depth.dpth, camera.json.
struct SceneFiles {
    std::filesystem::path image, depth, camera;
    static SceneFiles in(const std::filesystem::path &dir);
};

SceneFiles write_scene(const std::filesystem::path &dir, const train::SyntheticScene &scene);

std::string camera_json(const CameraSpec &camera);
CameraSpec parse_camera_json(const std::string &text);
void write_camera(const std::filesystem::path &path, const CameraSpec &camera);
CameraSpec read_camera(const std::filesystem::path &path);

struct LoadedScene {
    RgbImage image;
    CameraSpec camera;
    ScenePointCloud cloud;
};
/// Back-projects depth (or a layered depth image when `ldi` is set) through
/// the camera into an NDC cloud.
LoadedScene load_scene(const std::filesystem::path &image, const std::filesystem::path &depth,
                       const std::filesystem::path &camera, const std::filesystem::path &ldi = {});

/// Largest allowed offset from the canonical pose, per axis.
struct PoseBounds {
    double translation = 0.3;
    double rotation_deg = 20.0;
};
/// Empty when inside the bounds, otherwise a description of the violation.
std::optional<std::string> check_pose(const CameraSpec &canonical, const CameraSpec &camera, const PoseBounds &b);

/// 64-bit FNV-1a over the image size and its 8-bit pixels, as 16 hex digits.
std::string style_id(const RgbImage &style);

struct StyleUpdate {
    std::string id;
    bool cache_hit = false;
};

/// Scene, model and style state for rendering. Content features are encoded
/// once at construction; stylized features are recomputed only when the style
/// changes. render() may run concurrently; set_style() is exclusive.
class RenderSession {
  public:
    RenderSession(LoadedScene scene, train::Model model, const RgbImage &style);
    static RenderSession open(const PipelineConfig &cfg);

    StyleUpdate set_style(const RgbImage &style);
    std::string current_style() const;

    /// Frame for `camera`; its resolution may differ from the scene's but
    /// both sides must be multiples of 4.
    RgbImage render(const CameraSpec &camera) const;
    render::SplatPlan plan(const CameraSpec &camera) const;

    const CameraSpec &canonical() const { return scene_.camera; }
    const ScenePointCloud &cloud() const { return scene_.cloud; }
    const train::Model &model() const { return model_; }
    PoseBounds bounds() const { return bounds_; }
    /// Times the stylizer ran (cache misses).
    int stylize_count() const;

  private:
    LoadedScene scene_;
    train::Model model_;
    model::ContentFeatures content_;
    PoseBounds bounds_;
    mutable std::shared_mutex mutex_;
    Tensor stylized_;
    std::string style_id_;
    int stylize_count_ = 0;
};

struct FrameRecord {
    int index = 0;
    std::string file;
    std::array<double, 12> pose{};
    double render_ms = 0.0;
};

/// Renders the configured trajectory into `<out>/frames` and writes
/// `<out>/manifest.json`.
std::vector<FrameRecord> stylize3d(const PipelineConfig &cfg, const RenderSession &session);

void write_manifest(const std::filesystem::path &path, const std::vector<FrameRecord> &frames,
                    const std::string &style, int width, int height);

/// Renders the trajectory and evaluates its consistency; writes
/// `<out>/consistency.json` and `<out>/consistency.csv`.
eval::ConsistencyReport eval_consistency(const PipelineConfig &cfg, const RenderSession &session);

} // namespace stylepoint::pipeline
