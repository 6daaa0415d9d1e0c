// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/kernels/sparse.hpp"
#include "stylepoint/tensor/tensor.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

// Subsampling, neighborhood and interpolation kernels over N x 3 point sets
// (flat xyz arrays). Each kernel has a serial reference version; the default
// versions parallelize over points and return identical results.
namespace stylepoint::pointcloud {

/// Farthest point sampling result.
struct SampleIndex {
    std::vector<std::int64_t> indices;
    /// Min-distance to the already-selected set at the time each point was
    /// chosen (infinity for the seed).
    std::vector<float> distances;
};

/// Ball-query adjacency in row-compressed form; neighbors of query q are
/// neighbors[offsets[q] .. offsets[q+1]) in ascending source index.
struct NeighborGraph {
    std::vector<std::int64_t> offsets{0};
    std::vector<std::int64_t> neighbors;
    float radius = 0.0f;
    std::int64_t max_neighbors = 0;

    std::int64_t queries() const { return static_cast<std::int64_t>(offsets.size()) - 1; }
    std::span<const std::int64_t> of(std::int64_t q) const {
        return {neighbors.data() + offsets[static_cast<std::size_t>(q)],
                static_cast<std::size_t>(offsets[static_cast<std::size_t>(q) + 1] - offsets[static_cast<std::size_t>(q)])};
    }
};

/// Greedy max-min selection of m points. The seed is the point nearest the
/// centroid; ties resolve to the lowest index.
SampleIndex farthest_point_sample(std::span<const float> points, std::int64_t m);

/// Up to `k` sources within distance `radius` of each query, the lowest
/// source indices first. Uses a uniform grid with cell size `radius`.
NeighborGraph ball_query(std::span<const float> queries, std::span<const float> sources, float radius,
                         std::int64_t k);

inline constexpr float kIdwDelta = 1e-8f;

/// Inverse-distance weights over the k nearest sources of every target
/// (rows = targets, cols = sources). A target within kIdwDelta of a source
/// takes that source's value exactly.
kernels::SparseMap idw_weights(std::span<const float> targets, std::span<const float> sources, std::int64_t k = 3,
                               float power = 2.0f);

/// features [N, C] at `sources` -> [M, C] at `targets`. Differentiable in the
/// features (the backward pass applies the transposed weights).
Tensor idw_interpolate(std::span<const float> targets, std::span<const float> sources, const Tensor &features,
                       std::int64_t k = 3, float power = 2.0f);

namespace reference {
SampleIndex farthest_point_sample(std::span<const float> points, std::int64_t m);
NeighborGraph ball_query(std::span<const float> queries, std::span<const float> sources, float radius,
                         std::int64_t k);
kernels::SparseMap idw_weights(std::span<const float> targets, std::span<const float> sources, std::int64_t k = 3,
                               float power = 2.0f);
} // namespace reference

} // namespace stylepoint::pointcloud
