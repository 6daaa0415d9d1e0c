// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/pipeline/session.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace stylepoint::pipeline {

namespace {

constexpr int kStyleSize = 64; // style images are fitted to the training size

std::string read_text(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

} // namespace

SceneFiles SceneFiles::in(const std::filesystem::path &dir) {
    return {dir / "image.png", dir / "depth.dpth", dir / "camera.json"};
}

SceneFiles write_scene(const std::filesystem::path &dir, const train::SyntheticScene &scene) {
    std::filesystem::create_directories(dir);
    const auto files = SceneFiles::in(dir);
    const auto r = scene.render(scene.canonical);
    write_png(files.image, r.image);
    write_depth(files.depth, r.depth);
    write_camera(files.camera, scene.canonical);
    return files;
}

std::string camera_json(const CameraSpec &camera) {
    nlohmann::json j;
    j["width"] = camera.width;
    j["height"] = camera.height;
    j["fx"] = camera.fx;
    j["fy"] = camera.fy;
    j["cx"] = camera.cx;
    j["cy"] = camera.cy;
    j["pose"] = camera.pose_matrix();
    return j.dump(2) + "\n";
}

CameraSpec parse_camera_json(const std::string &text) {
    CameraSpec cam;
    try {
        const auto j = nlohmann::json::parse(text);
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.set_pose_matrix(j.at("pose").get<std::array<double, 12>>());
    } catch (const nlohmann::json::exception &e) {
        throw CameraError(std::string("camera json: ") + e.what());
    }
    cam.validate();
    return cam;
}

void write_camera(const std::filesystem::path &path, const CameraSpec &camera) {
    write_text(path, camera_json(camera));
}

CameraSpec read_camera(const std::filesystem::path &path) { return parse_camera_json(read_text(path)); }

LoadedScene load_scene(const std::filesystem::path &image, const std::filesystem::path &depth,
                       const std::filesystem::path &camera, const std::filesystem::path &ldi) {
    LoadedScene s;
    s.image = read_png(image);
    s.camera = read_camera(camera);
    if (s.image.width != s.camera.width || s.image.height != s.camera.height) {
        throw GeometryError("scene image is " + std::to_string(s.image.width) + "x" + std::to_string(s.image.height) +
                            " but the camera is " + std::to_string(s.camera.width) + "x" +
                            std::to_string(s.camera.height));
    }
    const auto pts = ldi.empty() ? back_project(s.image, read_depth(depth), s.camera)
                                 : back_project(s.image, read_ldi(ldi), s.camera);
    if (pts.size() == 0) throw GeometryError("scene has no valid depth");
    const auto [near, far] = depth_bounds(pts, s.camera);
    s.cloud = normalize_ndc(pts, s.camera, near, far);
    return s;
}

std::optional<std::string> check_pose(const CameraSpec &canonical, const CameraSpec &camera, const PoseBounds &b) {
    const auto off = train::pose_offset(canonical, camera);
    static const char *axes[3] = {"x", "y", "z"};
    static const char *angles[3] = {"yaw", "pitch", "roll"};
    for (int k = 0; k < 3; ++k) {
        if (!(std::fabs(off.translation[k]) <= b.translation)) {
            return std::string("translation ") + axes[k] + " = " + std::to_string(off.translation[k]) +
                   " exceeds +-" + std::to_string(b.translation);
        }
        if (!(std::fabs(off.euler_deg[k]) <= b.rotation_deg)) {
            return std::string(angles[k]) + " = " + std::to_string(off.euler_deg[k]) + " deg exceeds +-" +
                   std::to_string(b.rotation_deg);
        }
    }
    return std::nullopt;
}

std::string style_id(const RgbImage &style) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint8_t byte) {
        h ^= byte;
        h *= 1099511628211ull;
    };
    for (int v : {style.width, style.height}) {
        for (int s = 0; s < 32; s += 8) mix(static_cast<std::uint8_t>(static_cast<unsigned>(v) >> s));
    }
    for (float v : style.rgb) mix(to_byte(v));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RenderSession::RenderSession(LoadedScene scene, train::Model model, const RgbImage &style)
    : scene_(std::move(scene)), model_(std::move(model)) {
    const auto &enc = model_.config.encoder;
    const auto geometry = model::build_encoder_geometry(scene_.cloud.positions, enc);
    content_ = model::encode(model::encoder_input(scene_.cloud), geometry, enc, model_.encoder, false);
    set_style(style);
}

RenderSession RenderSession::open(const PipelineConfig &cfg) {
    cfg.require_render_inputs();
    auto scene = load_scene(cfg.image, cfg.depth, cfg.camera, cfg.ldi);
    train::TrainState state{train::Model::init(cfg.model_config()), {}};
    train::load_checkpoint(cfg.checkpoint, state);
    return RenderSession(std::move(scene), std::move(state.model), read_png(cfg.style));
}

StyleUpdate RenderSession::set_style(const RgbImage &style) {
    const std::string id = style_id(style);
    {
        std::shared_lock lock(mutex_);
        if (id == style_id_) return {id, true};
    }
    const RgbImage fitted =
        style.width == kStyleSize && style.height == kStyleSize ? style : resize_bilinear(style, kStyleSize, kStyleSize);
    const auto features = model::extract_style_features(fitted, model_.pyramid);
    Tensor fcs = train::stylized_features(model_, content_, features);
    std::unique_lock lock(mutex_);
    if (id == style_id_) return {id, true};
    stylized_ = std::move(fcs);
    style_id_ = id;
    ++stylize_count_;
    return {id, false};
}

std::string RenderSession::current_style() const {
    std::shared_lock lock(mutex_);
    return style_id_;
}

int RenderSession::stylize_count() const {
    std::shared_lock lock(mutex_);
    return stylize_count_;
}

render::SplatPlan RenderSession::plan(const CameraSpec &camera) const {
    return render::plan_splats(scene_.cloud.positions, scene_.cloud.record, camera, model_.config.render.raster);
}

RgbImage RenderSession::render(const CameraSpec &camera) const {
    camera.validate();
    if (camera.width % 4 || camera.height % 4) {
        throw std::invalid_argument("render size must be a multiple of 4, got " + std::to_string(camera.width) + "x" +
                                    std::to_string(camera.height));
    }
    Tensor features;
    {
        std::shared_lock lock(mutex_);
        features = stylized_;
    }
    const auto view = render::render_view(scene_.cloud, content_.positions, features, camera, model_.decoder,
                                          model_.config.render);
    return render::to_image(view.image);
}

void write_manifest(const std::filesystem::path &path, const std::vector<FrameRecord> &frames,
                    const std::string &style, int width, int height) {
    nlohmann::json j;
    j["style_id"] = style;
    j["width"] = width;
    j["height"] = height;
    j["frames"] = nlohmann::json::array();
    for (const auto &f : frames) {
        j["frames"].push_back({{"index", f.index}, {"file", f.file}, {"pose", f.pose}, {"render_ms", f.render_ms}});
    }
    write_text(path, j.dump(2) + "\n");
}

std::vector<FrameRecord> stylize3d(const PipelineConfig &cfg, const RenderSession &session) {
    const auto cams = make_trajectory(session.canonical(), cfg.trajectory);
    const auto dir = cfg.out / "frames";
    std::filesystem::create_directories(dir);
    std::vector<FrameRecord> frames;
    for (std::size_t k = 0; k < cams.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto img = session.render(cams[k]);
        const auto t1 = std::chrono::steady_clock::now();
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03zu.png", k);
        write_png(dir / name, img);
        frames.push_back({static_cast<int>(k), std::string("frames/") + name, cams[k].pose_matrix(),
                          std::chrono::duration<double, std::milli>(t1 - t0).count()});
    }
    write_manifest(cfg.out / "manifest.json", frames, session.current_style(), session.canonical().width,
                   session.canonical().height);
    return frames;
}

eval::ConsistencyReport eval_consistency(const PipelineConfig &cfg, const RenderSession &session) {
    const auto cams = make_trajectory(session.canonical(), cfg.trajectory);
    std::vector<RgbImage> views;
    for (const auto &c : cams) views.push_back(session.render(c));
    eval::ConsistencyOptions opt;
    opt.raster = session.model().config.render.raster;
    auto report = eval::consistency_rmse(views, cams, session.cloud(), opt);
    std::filesystem::create_directories(cfg.out);
    eval::write_report_json(cfg.out / "consistency.json", report);
    eval::write_report_csv(cfg.out / "consistency.csv", report);
    return report;
}

} // namespace stylepoint::pipeline
