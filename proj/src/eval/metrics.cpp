// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/eval/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace stylepoint::eval {

NoCovisibilityError::NoCovisibilityError(int i_, int j_)
    : std::runtime_error("views " + std::to_string(i_) + " and " + std::to_string(j_) + " share no visible point"),
      i(i_), j(j_) {}

std::size_t WarpResult::masked_pixels() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

WarpResult warp(const RgbImage &source, const render::SplatPlan &plan_i, const render::SplatPlan &plan_j, int pair_i,
                int pair_j) {
    if (plan_i.points() != plan_j.points()) {
        throw std::invalid_argument("warp: plans cover different point sets");
    }
    if (source.width != plan_i.width || source.height != plan_i.height) {
        throw std::invalid_argument("warp: source image does not match view " + std::to_string(pair_i));
    }
    const int w = plan_j.width, h = plan_j.height;
    WarpResult out;
    out.image = RgbImage(w, h);
    out.mask.assign(static_cast<std::size_t>(w) * h, 0);
    std::vector<float> nearest(out.mask.size(), std::numeric_limits<float>::infinity());
    for (std::int64_t p = 0; p < plan_i.points(); ++p) {
        const auto q = static_cast<std::size_t>(p);
        if (!plan_i.visible[q] || !plan_j.visible[q]) continue;
        ++out.covisible_points;
        // visibility already guarantees both pixels are inside their images
        const int xi = static_cast<int>(std::floor(plan_i.pixel_xy[q * 2]));
        const int yi = static_cast<int>(std::floor(plan_i.pixel_xy[q * 2 + 1]));
        const int xj = static_cast<int>(std::floor(plan_j.pixel_xy[q * 2]));
        const int yj = static_cast<int>(std::floor(plan_j.pixel_xy[q * 2 + 1]));
        const auto pix = static_cast<std::size_t>(yj) * w + xj;
        if (!(plan_j.depth[q] < nearest[pix])) continue; // ties keep the lower index
        nearest[pix] = plan_j.depth[q];
        out.mask[pix] = 1;
        for (int c = 0; c < 3; ++c) out.image.at(xj, yj, c) = source.at(xi, yi, c);
    }
    if (out.covisible_points == 0) {
        throw NoCovisibilityError(pair_i, pair_j);
    }
    return out;
}

WarpResult warp(const RgbImage &source, const ScenePointCloud &cloud, const CameraSpec &cam_i,
                const CameraSpec &cam_j, const render::RasterConfig &cfg) {
    const auto pi = render::plan_splats(cloud.positions, cloud.record, cam_i, cfg);
    const auto pj = render::plan_splats(cloud.positions, cloud.record, cam_j, cfg);
    return warp(source, pi, pj);
}

namespace {

void check_pair(const RgbImage &a, const RgbImage &b, const std::vector<std::uint8_t> &mask, const char *who) {
    if (a.width != b.width || a.height != b.height || mask.size() != a.pixels()) {
        throw std::invalid_argument(std::string(who) + ": image and mask sizes differ");
    }
}

} // namespace

double masked_rmse(const RgbImage &warped, const RgbImage &target, const std::vector<std::uint8_t> &mask) {
    check_pair(warped, target, mask, "masked_rmse");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p]) continue;
        for (int c = 0; c < 3; ++c) {
            const double d = static_cast<double>(warped.rgb[p * 3 + c]) - target.rgb[p * 3 + c];
            sum += d * d;
        }
        n += 3;
    }
    if (n == 0) {
        throw std::invalid_argument("masked_rmse: empty mask");
    }
    return std::sqrt(sum / static_cast<double>(n));
}

double masked_feature_distance(const RgbImage &warped, const RgbImage &target, const std::vector<std::uint8_t> &mask,
                               const model::StylePyramid &pyramid) {
    check_pair(warped, target, mask, "masked_feature_distance");
    int x0 = warped.width, y0 = warped.height, x1 = -1, y1 = -1;
    for (int y = 0; y < warped.height; ++y) {
        for (int x = 0; x < warped.width; ++x) {
            if (!mask[static_cast<std::size_t>(y) * warped.width + x]) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) {
        throw std::invalid_argument("masked_feature_distance: empty mask");
    }
    const int cw = x1 - x0 + 1, ch = y1 - y0 + 1;
    std::vector<float> a(static_cast<std::size_t>(3) * cw * ch), b(a.size()), m(static_cast<std::size_t>(cw) * ch);
    for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
            const auto src = static_cast<std::size_t>(y + y0) * warped.width + (x + x0);
            const auto dst = static_cast<std::size_t>(y) * cw + x;
            m[dst] = mask[src] ? 1.0f : 0.0f;
            for (int c = 0; c < 3; ++c) {
                const float t = target.rgb[src * 3 + c];
                b[static_cast<std::size_t>(c) * cw * ch + dst] = t;
                a[static_cast<std::size_t>(c) * cw * ch + dst] = mask[src] ? warped.rgb[src * 3 + c] : t;
            }
        }
    }
    const auto fa = pyramid.features(Tensor::from({3, ch, cw}, std::move(a)));
    const auto fb = pyramid.features(Tensor::from({3, ch, cw}, std::move(b)));
    double total = 0.0;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        const auto lc = fa[l].size(0), lh = fa[l].size(1), lw = fa[l].size(2);
        // mask coverage of each cell at this level (level l is 2^l px per cell)
        const int stride = 1 << l;
        std::vector<double> cover(static_cast<std::size_t>(lh * lw), 0.0);
        for (int y = 0; y < ch; ++y) {
            for (int x = 0; x < cw; ++x) {
                const auto cy = std::min<std::int64_t>(y / stride, lh - 1);
                const auto cx = std::min<std::int64_t>(x / stride, lw - 1);
                cover[static_cast<std::size_t>(cy * lw + cx)] += m[static_cast<std::size_t>(y) * cw + x];
            }
        }
        const auto da = fa[l].data(), db = fb[l].data();
        double num = 0.0, den = 0.0;
        for (std::int64_t p = 0; p < lh * lw; ++p) {
            const double wgt = cover[static_cast<std::size_t>(p)];
            if (wgt == 0.0) continue;
            double sq = 0.0;
            for (std::int64_t c = 0; c < lc; ++c) {
                const double d = static_cast<double>(da[static_cast<std::size_t>(c * lh * lw + p)]) -
                                 db[static_cast<std::size_t>(c * lh * lw + p)];
                sq += d * d;
            }
            num += wgt * sq / static_cast<double>(lc);
            den += wgt;
        }
        total += num / den;
    }
    return total / static_cast<double>(fa.size());
}

double psnr(const RgbImage &a, const RgbImage &b) {
    if (a.width != b.width || a.height != b.height) {
        throw std::invalid_argument("psnr: image sizes differ");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < a.rgb.size(); ++k) {
        const double d = static_cast<double>(a.rgb[k]) - b.rgb[k];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.rgb.size());
    return mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
}

const char *to_string(PairRange r) { return r == PairRange::Short ? "short" : "long"; }

void summarize(ConsistencyReport &report) {
    report.short_range = report.long_range = report.all = {};
    for (const auto &p : report.pairs) {
        for (auto *s : {&report.all, p.range == PairRange::Short ? &report.short_range : &report.long_range}) {
            ++s->pairs;
            s->mean_rmse += p.rmse;
            s->mean_feature_distance += p.feature_distance;
        }
    }
    for (auto *s : {&report.short_range, &report.long_range, &report.all}) {
        if (s->pairs == 0) continue;
        s->mean_rmse /= static_cast<double>(s->pairs);
        s->mean_feature_distance /= static_cast<double>(s->pairs);
    }
}

ConsistencyReport consistency_rmse(const std::vector<RgbImage> &views, const std::vector<CameraSpec> &cameras,
                                   const ScenePointCloud &cloud, const ConsistencyOptions &opt) {
    if (views.size() < 2 || views.size() != cameras.size()) {
        throw std::invalid_argument("consistency_rmse needs at least 2 views with one camera each, got " +
                                    std::to_string(views.size()) + " views and " + std::to_string(cameras.size()) +
                                    " cameras");
    }
    if (opt.long_stride < 2) {
        throw std::invalid_argument("consistency_rmse: long-range stride must be at least 2");
    }
    const int n = static_cast<int>(views.size());
    std::vector<render::SplatPlan> plans(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < n; ++k) {
        const auto s = static_cast<std::size_t>(k);
        plans[s] = render::plan_splats(cloud.positions, cloud.record, cameras[s], opt.raster);
    }
    struct Job {
        int i, j;
        PairRange range;
    };
    std::vector<Job> jobs;
    for (int k = 0; k + 1 < n; ++k) jobs.push_back({k, k + 1, PairRange::Short});
    for (int k = 0; k + opt.long_stride < n; ++k) jobs.push_back({k, k + opt.long_stride, PairRange::Long});

    const model::StylePyramid pyramid;
    std::vector<PairMetrics> metrics(jobs.size());
    std::vector<std::string> failure(jobs.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t t = 0; t < jobs.size(); ++t) {
        const auto &job = jobs[t];
        const auto &target = views[static_cast<std::size_t>(job.j)];
        try {
            const auto w = warp(views[static_cast<std::size_t>(job.i)], plans[static_cast<std::size_t>(job.i)],
                                plans[static_cast<std::size_t>(job.j)], job.i, job.j);
            auto &m = metrics[t];
            m = {job.i, job.j, job.range, masked_rmse(w.image, target, w.mask), 0.0, w.masked_pixels()};
            if (opt.feature_distance) m.feature_distance = masked_feature_distance(w.image, target, w.mask, pyramid);
        } catch (const NoCovisibilityError &e) {
            failure[t] = e.what();
        }
    }
    ConsistencyReport report;
    for (std::size_t t = 0; t < jobs.size(); ++t) {
        if (failure[t].empty()) report.pairs.push_back(metrics[t]);
        else report.excluded.push_back({jobs[t].i, jobs[t].j, jobs[t].range, failure[t]});
    }
    summarize(report);
    return report;
}

namespace {

nlohmann::json summary_json(const RangeSummary &s) {
    return {{"pairs", s.pairs}, {"mean_rmse", s.mean_rmse}, {"mean_feature_distance", s.mean_feature_distance}};
}

} // namespace

std::string report_json(const ConsistencyReport &report) {
    nlohmann::json j;
    j["pairs"] = nlohmann::json::array();
    for (const auto &p : report.pairs) {
        j["pairs"].push_back({{"i", p.i},
                              {"j", p.j},
                              {"range", to_string(p.range)},
                              {"rmse", p.rmse},
                              {"feature_distance", p.feature_distance},
                              {"covisible_pixels", p.covisible_pixels}});
    }
    j["excluded"] = nlohmann::json::array();
    for (const auto &e : report.excluded) {
        j["excluded"].push_back({{"i", e.i}, {"j", e.j}, {"range", to_string(e.range)}, {"reason", e.reason}});
    }
    j["summary"] = {{"short", summary_json(report.short_range)},
                    {"long", summary_json(report.long_range)},
                    {"all", summary_json(report.all)}};
    return j.dump(2);
}

void write_report_json(const std::filesystem::path &path, const ConsistencyReport &report) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << report_json(report) << '\n';
}

void write_report_csv(const std::filesystem::path &path, const ConsistencyReport &report) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.precision(9);
    out << "i,j,range,rmse,feature_distance,covisible_pixels\n";
    for (const auto &p : report.pairs) {
        out << p.i << ',' << p.j << ',' << to_string(p.range) << ',' << p.rmse << ',' << p.feature_distance << ','
            << p.covisible_pixels << '\n';
    }
    for (const auto &[name, s] : {std::pair{"short", &report.short_range}, std::pair{"long", &report.long_range},
                                  std::pair{"all", &report.all}}) {
        out << "mean,," << name << ',' << s->mean_rmse << ',' << s->mean_feature_distance << ','
            << s->pairs << '\n';
    }
}

} // namespace stylepoint::eval
