// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/pipeline/session.hpp"

#include <memory>
#include <string>

// Local HTTP render service:
//   GET  /healthz  -> {"status":"ok"}
//   GET  /session  -> scene size, canonical camera, pose bounds, style id
//   POST /render   {"pose":[12 floats, row-major R|t], "width":W, "height":H}
//                  -> image/png with X-Render-Time-Ms and X-Render-Timestamp
//   POST /style    multipart field "style" (PNG) -> {"style_id", "cache_hit"}
// Poses beyond the bounds get 422 with the bounds echoed; malformed requests
// get 400.
namespace stylepoint::pipeline {

inline constexpr std::size_t kMaxStyleBytes = 10u << 20;

class RenderService {
  public:
    explicit RenderService(RenderSession &session);
    ~RenderService();
    RenderService(const RenderService &) = delete;
    RenderService &operator=(const RenderService &) = delete;

    /// Serves on a background thread; port 0 picks a free port. Returns the
    /// bound port.
    int start(const std::string &host = "127.0.0.1", int port = 0);
    /// Serves on the calling thread until stop().
    void run(const std::string &host, int port);
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace stylepoint::pipeline
