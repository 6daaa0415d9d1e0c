// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/pipeline/service.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace stylepoint::pipeline {

namespace {

using nlohmann::json;

void send_json(httplib::Response &res, int status, const json &body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response &res, int status, const std::string &msg) { send_json(res, status, {{"error", msg}}); }

json bounds_json(const PoseBounds &b) { return {{"translation", b.translation}, {"rotation_deg", b.rotation_deg}}; }

} // namespace

struct RenderService::Impl {
    RenderSession &session;
    httplib::Server server;
    std::thread thread;
    const std::chrono::steady_clock::time_point epoch = std::chrono::steady_clock::now();
    std::atomic<std::int64_t> last_stamp{0};

    explicit Impl(RenderSession &s) : session(s) { routes(); }

    // Microseconds since start, strictly increasing across responses.
    std::int64_t stamp() {
        const auto now =
            std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - epoch).count();
        std::int64_t prev = last_stamp.load();
        std::int64_t next = 0;
        do {
            next = std::max<std::int64_t>(now, prev + 1);
        } while (!last_stamp.compare_exchange_weak(prev, next));
        return next;
    }

    void routes() {
        server.Get("/healthz", [](const httplib::Request &, httplib::Response &res) {
            send_json(res, 200, {{"status", "ok"}});
        });
        server.Get("/session", [this](const httplib::Request &, httplib::Response &res) {
            const auto &cam = session.canonical();
            send_json(res, 200,
                      {{"width", cam.width},
                       {"height", cam.height},
                       {"points", session.cloud().size()},
                       {"camera", json::parse(camera_json(cam))},
                       {"bounds", bounds_json(session.bounds())},
                       {"style_id", session.current_style()}});
        });
        server.Post("/render", [this](const httplib::Request &req, httplib::Response &res) { render(req, res); });
        server.Post("/style", [this](const httplib::Request &req, httplib::Response &res) { style(req, res); });
        server.set_exception_handler([](const httplib::Request &, httplib::Response &res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception &e) {
                send_error(res, 500, e.what());
            }
        });
        server.set_payload_max_length(kMaxStyleBytes + (1u << 16));
    }

    void render(const httplib::Request &req, httplib::Response &res) {
        CameraSpec cam = session.canonical();
        try {
            const auto body = json::parse(req.body);
            const auto &pose = body.at("pose");
            if (!pose.is_array() || pose.size() != 12) throw std::invalid_argument("pose must hold 12 numbers");
            std::array<double, 12> m{};
            for (std::size_t k = 0; k < 12; ++k) {
                if (!pose[k].is_number()) throw std::invalid_argument("pose must hold 12 numbers");
                m[k] = pose[k].get<double>();
                if (!std::isfinite(m[k])) throw std::invalid_argument("pose values must be finite");
            }
            const int w = body.value("width", cam.width), h = body.value("height", cam.height);
            if (w < 4 || h < 4 || w > 1024 || h > 1024 || w % 4 || h % 4) {
                throw std::invalid_argument("width and height must be multiples of 4 in [4, 1024]");
            }
            cam = cam.resized(w, h);
            cam.set_pose_matrix(m);
            cam.validate();
        } catch (const std::exception &e) {
            send_error(res, 400, std::string("malformed render request: ") + e.what());
            return;
        }
        if (const auto why = check_pose(session.canonical(), cam, session.bounds())) {
            send_json(res, 422, {{"error", "pose outside bounds: " + *why}, {"bounds", bounds_json(session.bounds())}});
            return;
        }
        const auto t0 = std::chrono::steady_clock::now();
        const auto png = encode_png(session.render(cam));
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        res.status = 200;
        res.set_header("X-Render-Time-Ms", std::to_string(ms));
        res.set_header("X-Render-Timestamp", std::to_string(stamp()));
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    }

    void style(const httplib::Request &req, httplib::Response &res) {
        if (!req.is_multipart_form_data() || !req.has_file("style")) {
            send_error(res, 400, "expected multipart form data with a 'style' file");
            return;
        }
        const auto file = req.get_file_value("style");
        if (file.content.size() > kMaxStyleBytes) {
            send_error(res, 413, "style image exceeds 10 MB");
            return;
        }
        RgbImage img;
        try {
            img = decode_png({reinterpret_cast<const std::uint8_t *>(file.content.data()), file.content.size()});
        } catch (const std::exception &e) {
            send_error(res, 400, std::string("style is not a readable PNG: ") + e.what());
            return;
        }
        if (img.width < 8 || img.height < 8) {
            send_error(res, 400, "style image must be at least 8x8");
            return;
        }
        const auto up = session.set_style(img);
        send_json(res, 200, {{"style_id", up.id}, {"cache_hit", up.cache_hit}});
    }
};

RenderService::RenderService(RenderSession &session) : impl_(std::make_unique<Impl>(session)) {}

RenderService::~RenderService() { stop(); }

int RenderService::start(const std::string &host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void RenderService::run(const std::string &host, int port) {
    if (!impl_->server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

void RenderService::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

} // namespace stylepoint::pipeline
