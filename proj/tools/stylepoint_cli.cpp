// SPDX-License-Identifier: Apache-2.0
// stylepoint: make-scene, train, stylize3d, eval-consistency, serve.
#include "stylepoint/parallel.hpp"
#include "stylepoint/pipeline/service.hpp"
#include "stylepoint/pipeline/session.hpp"
#include "stylepoint/pipeline/training.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <cstdio>
#include <iostream>

#include <unistd.h>

namespace sp = stylepoint;
namespace pl = stylepoint::pipeline;

namespace {

struct Common {
    std::string config;
    std::string out;
    long long seed = -1;
    int port = -1;
};

pl::PipelineConfig load(const Common &c) {
    pl::PipelineConfig cfg = c.config.empty() ? pl::PipelineConfig::from(pl::KeyValueConfig{})
                                              : pl::PipelineConfig::load(c.config);
    if (!c.out.empty()) cfg.out = c.out;
    if (c.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(c.seed);
    if (c.port >= 0) cfg.port = c.port;
    return cfg;
}

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"3D photo stylization: point-cloud features, stylization and rendering"};
    app.require_subcommand(1);
    Common c;

    auto *make = app.add_subcommand("make-scene", "write a synthetic scene (image.png, depth.dpth, camera.json)");
    std::string kind = "boxes";
    long long scene_seed = 1;
    std::string scene_out = "scene";
    make->add_option("--kind", kind, "boxes | planes | room")->capture_default_str();
    make->add_option("--seed", scene_seed, "scene seed")->capture_default_str();
    make->add_option("--out", scene_out, "output directory")->capture_default_str();

    auto *train = app.add_subcommand("train", "two-stage training; writes stage1.spck, final.spck, losses.csv");
    bool smoke = false;
    train->add_option("--config", c.config, "config file");
    train->add_option("--seed", c.seed, "training seed");
    train->add_option("--out", c.out, "output directory");
    train->add_flag("--smoke", smoke, "short schedule on the first scene");

    auto *stylize = app.add_subcommand("stylize3d", "render the stylized trajectory to frames/ and manifest.json");
    stylize->add_option("--config", c.config, "config file")->required();
    stylize->add_option("--out", c.out, "output directory");

    auto *evalc = app.add_subcommand("eval-consistency", "warp-based consistency report of the trajectory");
    evalc->add_option("--config", c.config, "config file")->required();
    evalc->add_option("--out", c.out, "output directory");

    auto *serve = app.add_subcommand("serve", "local render service");
    serve->add_option("--config", c.config, "config file")->required();
    serve->add_option("--port", c.port, "port (0 picks one)");

    CLI11_PARSE(app, argc, argv);
    const int threads = sp::configure_threads_from_env();

    try {
        if (*make) {
            const auto scene = sp::train::SyntheticScene::generate(sp::train::parse_scene_kind(kind),
                                                                   static_cast<std::uint64_t>(scene_seed));
            const auto files = pl::write_scene(scene_out, scene);
            std::cout << "wrote " << files.image.string() << ", " << files.depth.string() << ", "
                      << files.camera.string() << '\n';
        } else if (*train) {
            const auto cfg = load(c);
            std::cout << "training on " << threads << " thread(s) into " << cfg.out.string() << '\n';
            const auto out = pl::run_training(cfg, smoke, [](const sp::train::LossRecord &r) {
                if ((r.iteration + 1) % 50 == 0) {
                    std::printf("stage %d iter %lld total %.5f\n", r.stage, static_cast<long long>(r.iteration + 1),
                                r.total);
                    std::fflush(stdout);
                }
            });
            std::printf("done in %.1f s: %s\n", out.seconds, out.checkpoint.string().c_str());
        } else if (*stylize) {
            const auto cfg = load(c);
            const auto session = pl::RenderSession::open(cfg);
            const auto frames = pl::stylize3d(cfg, session);
            std::cout << "wrote " << frames.size() << " frames to " << (cfg.out / "frames").string() << '\n';
        } else if (*evalc) {
            const auto cfg = load(c);
            const auto session = pl::RenderSession::open(cfg);
            const auto r = pl::eval_consistency(cfg, session);
            std::printf("short-range rmse %.5f (%zu pairs), long-range rmse %.5f (%zu pairs), %zu excluded\n",
                        r.short_range.mean_rmse, r.short_range.pairs, r.long_range.mean_rmse, r.long_range.pairs,
                        r.excluded.size());
        } else if (*serve) {
            const auto cfg = load(c);
            auto session = pl::RenderSession::open(cfg);
            pl::RenderService service(session);
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            const int port = service.start("127.0.0.1", cfg.port);
            std::cout << "serving on http://127.0.0.1:" << port << std::endl;
            while (!g_stop) pause(); // woken by the signal
            service.stop();
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
