// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/train/scene.hpp"
#include "stylepoint/train/trainer.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylepoint::pipeline {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// TOML-style key/value file: `key = value` lines, `[section]` headers that
/// prefix the following keys as `section.key`, `#` comments, quoted or bare
/// values.
class KeyValueConfig {
  public:
    static KeyValueConfig parse(const std::string &text, const std::string &source = "<config>");
    static KeyValueConfig load(const std::filesystem::path &path);

    bool has(const std::string &key) const { return values_.count(key) != 0; }
    std::string get(const std::string &key, const std::string &fallback) const;
    std::int64_t get_int(const std::string &key, std::int64_t fallback) const;
    double get_double(const std::string &key, double fallback) const;
    bool get_bool(const std::string &key, bool fallback) const;
    void set(const std::string &key, const std::string &value) { values_[key] = value; }
    /// Keys never read through a getter; typos show up here.
    std::vector<std::string> unused() const;
    const std::string &source() const { return source_; }

  private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, bool> read_;
    std::string source_;
    const std::string *find(const std::string &key) const;
};

enum class TrajectoryKind { Orbit, Static, Poses };

struct TrajectorySpec {
    TrajectoryKind kind = TrajectoryKind::Orbit;
    int frames = 30;
    double translation = 0.1;   // orbit amplitude, scene units
    double rotation_deg = 8.0;  // orbit amplitude
    std::vector<std::array<double, 12>> poses; // kind == Poses: row-major [R|t]
};

/// Cameras along the trajectory. Orbits start at the canonical pose.
std::vector<CameraSpec> make_trajectory(const CameraSpec &canonical, const TrajectorySpec &spec);

struct SceneRef {
    train::SceneKind kind = train::SceneKind::Boxes;
    std::uint64_t seed = 1;
};
/// "boxes:1, room:3" -> refs.
std::vector<SceneRef> parse_scene_list(const std::string &text);

struct PipelineConfig {
    // scene inputs (make-scene output layout by default)
    std::filesystem::path image, depth, ldi, camera;
    std::filesystem::path style;
    std::filesystem::path checkpoint;
    std::filesystem::path out = "out";
    std::string model = "desk";
    TrajectorySpec trajectory;
    train::TrainConfig train;
    std::vector<SceneRef> train_scenes{{train::SceneKind::Boxes, 1}};
    int port = 8080;

    /// Relative paths resolve against the config file's directory.
    static PipelineConfig from(const KeyValueConfig &kv, const std::filesystem::path &base = {});
    static PipelineConfig load(const std::filesystem::path &path);

    /// Inputs of a rendering command: scene files, style and checkpoint
    /// must exist. Throws ConfigError naming the missing file.
    void require_render_inputs() const;
    train::ModelConfig model_config() const;
};

/// The short schedule used by `train --smoke`.
train::TrainConfig smoke_schedule(train::TrainConfig base);

} // namespace stylepoint::pipeline
