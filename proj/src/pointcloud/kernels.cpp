// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/pointcloud/kernels.hpp"

#include "stylepoint/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

namespace stylepoint::pointcloud {

namespace {

std::size_t sz(std::int64_t v) { return static_cast<std::size_t>(v); }

std::int64_t count_of(std::span<const float> pts) {
    if (pts.size() % 3 != 0) {
        throw std::invalid_argument("point array length " + std::to_string(pts.size()) + " is not a multiple of 3");
    }
    return static_cast<std::int64_t>(pts.size() / 3);
}

inline float dist2(const float *a, const float *b) {
    const float dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

std::int64_t centroid_seed(std::span<const float> pts, std::int64_t n) {
    double c[3] = {0, 0, 0};
    for (std::int64_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
            c[k] += pts[sz(i * 3 + k)];
        }
    }
    const float cf[3] = {static_cast<float>(c[0] / n), static_cast<float>(c[1] / n), static_cast<float>(c[2] / n)};
    std::int64_t best = 0;
    float bd = dist2(&pts[0], cf);
    for (std::int64_t i = 1; i < n; ++i) {
        const float d = dist2(&pts[sz(i * 3)], cf);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

void check_fps_args(std::int64_t n, std::int64_t m) {
    if (m < 1 || m > n) {
        throw std::invalid_argument("farthest_point_sample: need 1 <= m <= N, got m=" + std::to_string(m) +
                                    " N=" + std::to_string(n));
    }
}

void check_query_args(float radius, std::int64_t k) {
    if (!(radius > 0.0f) || k < 1) {
        throw std::invalid_argument("ball_query: need radius > 0 and k >= 1");
    }
}

// Keeps the k smallest (distance, index) pairs; ties on distance keep the
// lower index.
void k_nearest(const float *target, std::span<const float> sources, std::int64_t n, std::int64_t k,
               std::vector<std::pair<float, std::int64_t>> &best) {
    best.clear();
    for (std::int64_t j = 0; j < n; ++j) {
        const std::pair<float, std::int64_t> cand{dist2(target, &sources[sz(j * 3)]), j};
        if (static_cast<std::int64_t>(best.size()) < k) {
            best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
        } else if (cand < best.back()) {
            best.pop_back();
            best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
        }
    }
}

void emit_idw_row(const std::vector<std::pair<float, std::int64_t>> &best, float power, kernels::SparseMap &map) {
    if (std::sqrt(best.front().first) < kIdwDelta) {
        map.push(best.front().second, 1.0f);
        return;
    }
    double total = 0.0;
    std::vector<double> w(best.size());
    for (std::size_t i = 0; i < best.size(); ++i) {
        const double d = std::max(static_cast<double>(std::sqrt(best[i].first)), static_cast<double>(kIdwDelta));
        w[i] = 1.0 / std::pow(d, static_cast<double>(power));
        total += w[i];
    }
    for (std::size_t i = 0; i < best.size(); ++i) {
        map.push(best[i].second, static_cast<float>(w[i] / total));
    }
}

struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey &o) const = default;
};

struct CellHash {
    std::size_t operator()(const CellKey &c) const {
        std::uint64_t h = static_cast<std::uint64_t>(c.x) * 73856093ULL;
        h ^= static_cast<std::uint64_t>(c.y) * 19349663ULL;
        h ^= static_cast<std::uint64_t>(c.z) * 83492791ULL;
        return static_cast<std::size_t>(h);
    }
};

CellKey cell_of(const float *p, float inv) {
    return {static_cast<std::int64_t>(std::floor(p[0] * inv)), static_cast<std::int64_t>(std::floor(p[1] * inv)),
            static_cast<std::int64_t>(std::floor(p[2] * inv))};
}

} // namespace

SampleIndex farthest_point_sample(std::span<const float> points, std::int64_t m) {
    const auto n = count_of(points);
    check_fps_args(n, m);
    SampleIndex out;
    out.indices.reserve(sz(m));
    std::vector<float> mind(sz(n), std::numeric_limits<float>::infinity());
    std::int64_t current = centroid_seed(points, n);
    out.indices.push_back(current);
    out.distances.push_back(std::numeric_limits<float>::infinity());
    mind[sz(current)] = -1.0f; // selected
    for (std::int64_t s = 1; s < m; ++s) {
        const float *c = &points[sz(current * 3)];
        std::int64_t best = -1;
        float best_d = -1.0f;
#pragma omp parallel
        {
            std::int64_t tb = -1;
            float td = -1.0f;
#pragma omp for schedule(static)
            for (std::int64_t i = 0; i < n; ++i) {
                if (mind[sz(i)] < 0.0f) {
                    continue;
                }
                const float d = dist2(&points[sz(i * 3)], c);
                if (d < mind[sz(i)]) {
                    mind[sz(i)] = d;
                }
                if (mind[sz(i)] > td) {
                    td = mind[sz(i)];
                    tb = i;
                }
            }
#pragma omp critical
            {
                if (tb >= 0 && (td > best_d || (td == best_d && tb < best))) {
                    best_d = td;
                    best = tb;
                }
            }
        }
        current = best;
        out.indices.push_back(current);
        out.distances.push_back(std::sqrt(best_d));
        mind[sz(current)] = -1.0f;
    }
    return out;
}

NeighborGraph ball_query(std::span<const float> queries, std::span<const float> sources, float radius,
                         std::int64_t k) {
    check_query_args(radius, k);
    const auto m = count_of(queries);
    const auto n = count_of(sources);
    const float r2 = radius * radius;
    const float inv = 1.0f / radius;
    // Cell -> ascending source indices.
    std::unordered_map<CellKey, std::vector<std::int64_t>, CellHash> grid;
    for (std::int64_t j = 0; j < n; ++j) {
        grid[cell_of(&sources[sz(j * 3)], inv)].push_back(j);
    }
    std::vector<std::vector<std::int64_t>> lists(sz(m));
#pragma omp parallel for schedule(dynamic, 32)
    for (std::int64_t q = 0; q < m; ++q) {
        const float *p = &queries[sz(q * 3)];
        const CellKey c = cell_of(p, inv);
        auto &found = lists[sz(q)];
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    const auto it = grid.find(CellKey{c.x + dx, c.y + dy, c.z + dz});
                    if (it == grid.end()) {
                        continue;
                    }
                    for (auto j : it->second) {
                        if (dist2(p, &sources[sz(j * 3)]) <= r2) {
                            found.push_back(j);
                        }
                    }
                }
            }
        }
        std::sort(found.begin(), found.end());
        if (static_cast<std::int64_t>(found.size()) > k) {
            found.resize(sz(k));
        }
    }
    NeighborGraph g;
    g.radius = radius;
    g.max_neighbors = k;
    for (const auto &l : lists) {
        g.neighbors.insert(g.neighbors.end(), l.begin(), l.end());
        g.offsets.push_back(static_cast<std::int64_t>(g.neighbors.size()));
    }
    return g;
}

kernels::SparseMap idw_weights(std::span<const float> targets, std::span<const float> sources, std::int64_t k,
                               float power) {
    const auto m = count_of(targets);
    const auto n = count_of(sources);
    if (n < 1) {
        throw std::invalid_argument("idw_interpolate needs at least one source point");
    }
    const std::int64_t kk = std::min(k, n);
    std::vector<kernels::SparseMap> rows(sz(m));
#pragma omp parallel
    {
        std::vector<std::pair<float, std::int64_t>> best;
#pragma omp for schedule(dynamic, 64)
        for (std::int64_t t = 0; t < m; ++t) {
            k_nearest(&targets[sz(t * 3)], sources, n, kk, best);
            emit_idw_row(best, power, rows[sz(t)]);
        }
    }
    kernels::SparseMap map;
    map.cols = n;
    for (const auto &r : rows) {
        map.index.insert(map.index.end(), r.index.begin(), r.index.end());
        map.weight.insert(map.weight.end(), r.weight.begin(), r.weight.end());
        map.end_row();
    }
    return map;
}

Tensor idw_interpolate(std::span<const float> targets, std::span<const float> sources, const Tensor &features,
                       std::int64_t k, float power) {
    const auto n = count_of(sources);
    if (features.dim() != 2 || features.size(0) != n) {
        throw ShapeError("idw_interpolate: features " + shape_str(features.shape()) + " do not match " +
                         std::to_string(n) + " sources");
    }
    const auto map = idw_weights(targets, sources, k, power);
    const auto c = features.size(1);
    return ops::sparse_mix(features, map, c, kernels::Layout::ItemMajor, kernels::Layout::ItemMajor, {map.rows, c});
}

namespace reference {

SampleIndex farthest_point_sample(std::span<const float> points, std::int64_t m) {
    const auto n = count_of(points);
    check_fps_args(n, m);
    SampleIndex out;
    std::vector<float> mind(sz(n), std::numeric_limits<float>::infinity());
    std::vector<bool> taken(sz(n), false);
    std::int64_t current = centroid_seed(points, n);
    out.indices.push_back(current);
    out.distances.push_back(std::numeric_limits<float>::infinity());
    taken[sz(current)] = true;
    for (std::int64_t s = 1; s < m; ++s) {
        std::int64_t best = -1;
        float best_d = -1.0f;
        for (std::int64_t i = 0; i < n; ++i) {
            if (taken[sz(i)]) {
                continue;
            }
            mind[sz(i)] = std::min(mind[sz(i)], dist2(&points[sz(i * 3)], &points[sz(current * 3)]));
            if (mind[sz(i)] > best_d) {
                best_d = mind[sz(i)];
                best = i;
            }
        }
        current = best;
        taken[sz(current)] = true;
        out.indices.push_back(current);
        out.distances.push_back(std::sqrt(best_d));
    }
    return out;
}

NeighborGraph ball_query(std::span<const float> queries, std::span<const float> sources, float radius,
                         std::int64_t k) {
    check_query_args(radius, k);
    const auto m = count_of(queries);
    const auto n = count_of(sources);
    const float r2 = radius * radius;
    NeighborGraph g;
    g.radius = radius;
    g.max_neighbors = k;
    for (std::int64_t q = 0; q < m; ++q) {
        std::int64_t taken = 0;
        for (std::int64_t j = 0; j < n && taken < k; ++j) {
            if (dist2(&queries[sz(q * 3)], &sources[sz(j * 3)]) <= r2) {
                g.neighbors.push_back(j);
                ++taken;
            }
        }
        g.offsets.push_back(static_cast<std::int64_t>(g.neighbors.size()));
    }
    return g;
}

kernels::SparseMap idw_weights(std::span<const float> targets, std::span<const float> sources, std::int64_t k,
                               float power) {
    const auto m = count_of(targets);
    const auto n = count_of(sources);
    if (n < 1) {
        throw std::invalid_argument("idw_interpolate needs at least one source point");
    }
    kernels::SparseMap map;
    map.cols = n;
    std::vector<std::pair<float, std::int64_t>> best;
    for (std::int64_t t = 0; t < m; ++t) {
        k_nearest(&targets[sz(t * 3)], sources, n, std::min(k, n), best);
        emit_idw_row(best, power, map);
        map.end_row();
    }
    return map;
}

} // namespace reference

} // namespace stylepoint::pointcloud
