// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/pipeline/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace stylepoint::pipeline {

namespace {

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside quotes.
std::string strip_comment(const std::string &line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

} // namespace

KeyValueConfig KeyValueConfig::parse(const std::string &text, const std::string &source) {
    KeyValueConfig cfg;
    cfg.source_ = source;
    std::istringstream in(text);
    std::string raw, section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        auto fail = [&](const std::string &what) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": " + what);
        };
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) fail("malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail("empty key");
        if (!value.empty() && value.front() == '"') {
            if (value.size() < 2 || value.back() != '"') fail("unterminated string");
            value = value.substr(1, value.size() - 2);
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (cfg.values_.count(full)) fail("duplicate key " + full);
        cfg.values_[full] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

const std::string *KeyValueConfig::find(const std::string &key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    read_[key] = true;
    return &it->second;
}

std::string KeyValueConfig::get(const std::string &key, const std::string &fallback) const {
    const auto *v = find(key);
    return v ? *v : fallback;
}

std::int64_t KeyValueConfig::get_int(const std::string &key, std::int64_t fallback) const {
    const auto *v = find(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size()) {
        throw ConfigError(source_ + ": " + key + " must be an integer, got '" + *v + "'");
    }
    return out;
}

double KeyValueConfig::get_double(const std::string &key, double fallback) const {
    const auto *v = find(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        const double out = std::stod(*v, &used);
        if (used == v->size()) return out;
    } catch (const std::exception &) {
    }
    throw ConfigError(source_ + ": " + key + " must be a number, got '" + *v + "'");
}

bool KeyValueConfig::get_bool(const std::string &key, bool fallback) const {
    const auto *v = find(key);
    if (!v) return fallback;
    if (*v == "true") return true;
    if (*v == "false") return false;
    throw ConfigError(source_ + ": " + key + " must be true or false, got '" + *v + "'");
}

std::vector<std::string> KeyValueConfig::unused() const {
    std::vector<std::string> out;
    for (const auto &[k, v] : values_) {
        if (!read_.count(k)) out.push_back(k);
    }
    return out;
}

std::vector<CameraSpec> make_trajectory(const CameraSpec &canonical, const TrajectorySpec &spec) {
    std::vector<CameraSpec> out;
    switch (spec.kind) {
    case TrajectoryKind::Static:
        if (spec.frames < 1) throw ConfigError("trajectory needs at least one frame");
        out.assign(static_cast<std::size_t>(spec.frames), canonical);
        break;
    case TrajectoryKind::Orbit:
        if (spec.frames < 1) throw ConfigError("trajectory needs at least one frame");
        for (int k = 0; k < spec.frames; ++k) {
            // a closed loop through the canonical pose at k = 0
            const double a = 2.0 * std::numbers::pi * k / spec.frames;
            const double s = std::sin(a), c = 0.5 * (1.0 - std::cos(a));
            out.push_back(train::offset_camera(canonical, {spec.translation * s, -0.5 * spec.translation * c, 0.0},
                                               {spec.rotation_deg * s, 0.5 * spec.rotation_deg * c, 0.0}));
        }
        break;
    case TrajectoryKind::Poses:
        if (spec.poses.empty()) throw ConfigError("pose trajectory is empty");
        for (const auto &m : spec.poses) {
            CameraSpec cam = canonical;
            cam.set_pose_matrix(m);
            out.push_back(cam);
        }
        break;
    }
    return out;
}

std::vector<SceneRef> parse_scene_list(const std::string &text) {
    std::vector<SceneRef> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto colon = item.find(':');
        SceneRef r;
        r.kind = train::parse_scene_kind(trim(item.substr(0, colon)));
        if (colon != std::string::npos) {
            const std::string seed = trim(item.substr(colon + 1));
            const auto [p, ec] = std::from_chars(seed.data(), seed.data() + seed.size(), r.seed);
            if (ec != std::errc() || p != seed.data() + seed.size()) {
                throw ConfigError("bad scene seed in '" + item + "'");
            }
        }
        out.push_back(r);
    }
    if (out.empty()) throw ConfigError("scene list is empty");
    return out;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path &base, const std::string &value) {
    if (value.empty()) return {};
    const std::filesystem::path p(value);
    return p.is_absolute() || base.empty() ? p : base / p;
}

std::array<double, 12> parse_pose(const std::string &text) {
    std::array<double, 12> m{};
    std::stringstream ss(text);
    std::string item;
    std::size_t n = 0;
    while (std::getline(ss, item, ',')) {
        if (n == 12) throw ConfigError("pose has more than 12 values: " + text);
        try {
            m[n++] = std::stod(item);
        } catch (const std::exception &) {
            throw ConfigError("bad pose value '" + item + "'");
        }
    }
    if (n != 12) throw ConfigError("pose needs 12 values, got " + std::to_string(n));
    return m;
}

} // namespace

PipelineConfig PipelineConfig::from(const KeyValueConfig &kv, const std::filesystem::path &base) {
    PipelineConfig c;
    const std::filesystem::path scene_dir = resolve(base, kv.get("scene.dir", ""));
    auto scene_file = [&](const char *key, const char *name) {
        const std::string v = kv.get(std::string("scene.") + key, "");
        if (!v.empty()) return resolve(base, v);
        return scene_dir.empty() ? std::filesystem::path{} : scene_dir / name;
    };
    c.image = scene_file("image", "image.png");
    c.depth = scene_file("depth", "depth.dpth");
    c.camera = scene_file("camera", "camera.json");
    c.ldi = resolve(base, kv.get("scene.ldi", ""));
    if (!c.ldi.empty() && !kv.has("scene.depth")) c.depth.clear();
    c.style = resolve(base, kv.get("style.image", ""));
    c.checkpoint = resolve(base, kv.get("model.checkpoint", ""));
    c.model = kv.get("model.preset", c.model);
    c.out = resolve(base, kv.get("output.dir", c.out.string()));
    c.port = static_cast<int>(kv.get_int("service.port", c.port));

    const std::string kind = kv.get("trajectory.kind", "orbit");
    if (kind == "orbit") c.trajectory.kind = TrajectoryKind::Orbit;
    else if (kind == "static") c.trajectory.kind = TrajectoryKind::Static;
    else if (kind == "poses") c.trajectory.kind = TrajectoryKind::Poses;
    else throw ConfigError("trajectory.kind must be orbit, static or poses, got '" + kind + "'");
    c.trajectory.frames = static_cast<int>(kv.get_int("trajectory.frames", c.trajectory.frames));
    c.trajectory.translation = kv.get_double("trajectory.translation", c.trajectory.translation);
    c.trajectory.rotation_deg = kv.get_double("trajectory.rotation_deg", c.trajectory.rotation_deg);
    for (int k = 0; kv.has("trajectory.pose" + std::to_string(k)); ++k) {
        c.trajectory.poses.push_back(parse_pose(kv.get("trajectory.pose" + std::to_string(k), "")));
    }

    auto &t = c.train;
    t.stage1_iterations = static_cast<int>(kv.get_int("train.stage1_iterations", t.stage1_iterations));
    t.stage2_iterations = static_cast<int>(kv.get_int("train.stage2_iterations", t.stage2_iterations));
    t.batch = static_cast<int>(kv.get_int("train.batch", t.batch));
    t.views = static_cast<int>(kv.get_int("train.views", t.views));
    t.stage1_lr = static_cast<float>(kv.get_double("train.stage1_lr", t.stage1_lr));
    t.stage2_lr = static_cast<float>(kv.get_double("train.stage2_lr", t.stage2_lr));
    t.poses.translation = kv.get_double("train.pose_translation", t.poses.translation);
    t.poses.rotation_deg = kv.get_double("train.pose_rotation_deg", t.poses.rotation_deg);
    t.weights.rgb = static_cast<float>(kv.get_double("train.weight_rgb", t.weights.rgb));
    t.weights.feat = static_cast<float>(kv.get_double("train.weight_feat", t.weights.feat));
    t.weights.cns = static_cast<float>(kv.get_double("train.weight_cns", t.weights.cns));
    t.weights.global = static_cast<float>(kv.get_double("train.weight_global", t.weights.global));
    t.weights.local = static_cast<float>(kv.get_double("train.weight_local", t.weights.local));
    t.style_count = static_cast<int>(kv.get_int("train.style_count", t.style_count));
    t.style_seed = static_cast<std::uint64_t>(kv.get_int("train.style_seed", static_cast<std::int64_t>(t.style_seed)));
    t.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<std::int64_t>(t.seed)));
    if (kv.has("train.scenes")) c.train_scenes = parse_scene_list(kv.get("train.scenes", ""));

    const auto unused = kv.unused();
    if (!unused.empty()) {
        throw ConfigError(kv.source() + ": unknown key " + unused.front());
    }
    t.validate();
    c.model_config();
    return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path &path) {
    return from(KeyValueConfig::load(path), path.parent_path());
}

void PipelineConfig::require_render_inputs() const {
    auto need = [](const std::filesystem::path &p, const char *what) {
        if (p.empty()) throw ConfigError(std::string("no ") + what + " configured");
        if (!std::filesystem::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
    };
    need(image, "scene image");
    need(camera, "scene camera");
    if (ldi.empty()) need(depth, "scene depth");
    else need(ldi, "scene layered depth");
    need(style, "style image");
    need(checkpoint, "checkpoint");
}

train::ModelConfig PipelineConfig::model_config() const {
    if (model == "desk") return train::ModelConfig::desk();
    if (model == "full") return train::ModelConfig::full();
    throw ConfigError("model.preset must be desk or full, got '" + model + "'");
}

train::TrainConfig smoke_schedule(train::TrainConfig base) {
    base.stage1_iterations = 100;
    base.stage2_iterations = 100;
    base.style_count = 3;
    return base;
}

} // namespace stylepoint::pipeline
