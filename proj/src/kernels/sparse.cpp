// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/kernels/sparse.hpp"

#include <algorithm>

namespace stylepoint::kernels {

SparseMap SparseMap::transposed() const {
    SparseMap t;
    t.rows = cols;
    t.cols = rows;
    std::vector<std::int64_t> counts(static_cast<std::size_t>(cols) + 1, 0);
    for (auto c : index) {
        ++counts[static_cast<std::size_t>(c) + 1];
    }
    t.offsets.assign(static_cast<std::size_t>(cols) + 1, 0);
    for (std::int64_t c = 0; c < cols; ++c) {
        t.offsets[static_cast<std::size_t>(c) + 1] = t.offsets[static_cast<std::size_t>(c)] + counts[static_cast<std::size_t>(c) + 1];
    }
    t.index.resize(index.size());
    t.weight.resize(weight.size());
    std::vector<std::int64_t> cursor(t.offsets.begin(), t.offsets.end() - 1);
    for (std::int64_t r = 0; r < rows; ++r) {
        for (auto e = offsets[static_cast<std::size_t>(r)]; e < offsets[static_cast<std::size_t>(r) + 1]; ++e) {
            const auto c = static_cast<std::size_t>(index[static_cast<std::size_t>(e)]);
            const auto slot = static_cast<std::size_t>(cursor[c]++);
            t.index[slot] = r;
            t.weight[slot] = weight[static_cast<std::size_t>(e)];
        }
    }
    return t;
}

namespace {

inline std::size_t at(Layout layout, std::int64_t item, std::int64_t channel, std::int64_t items,
                      std::int64_t channels) {
    return static_cast<std::size_t>(layout == Layout::ItemMajor ? item * channels + channel : channel * items + item);
}

} // namespace

void sparse_mix(const SparseMap &map, std::int64_t channels, std::span<const float> in, Layout in_layout,
                std::span<float> out, Layout out_layout) {
    const std::int64_t in_items = map.cols;
    const std::int64_t out_items = map.rows;
    if (in_layout == Layout::ItemMajor && out_layout == Layout::ItemMajor) {
#pragma omp parallel for schedule(dynamic, 64)
        for (std::int64_t r = 0; r < out_items; ++r) {
            float *dst = out.data() + r * channels;
            std::fill(dst, dst + channels, 0.0f);
            for (auto e = map.offsets[static_cast<std::size_t>(r)]; e < map.offsets[static_cast<std::size_t>(r) + 1]; ++e) {
                const float w = map.weight[static_cast<std::size_t>(e)];
                const float *src = in.data() + map.index[static_cast<std::size_t>(e)] * channels;
                for (std::int64_t c = 0; c < channels; ++c) {
                    dst[c] += w * src[c];
                }
            }
        }
        return;
    }
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t r = 0; r < out_items; ++r) {
        for (std::int64_t c = 0; c < channels; ++c) {
            out[at(out_layout, r, c, out_items, channels)] = 0.0f;
        }
        for (auto e = map.offsets[static_cast<std::size_t>(r)]; e < map.offsets[static_cast<std::size_t>(r) + 1]; ++e) {
            const float w = map.weight[static_cast<std::size_t>(e)];
            const auto src = map.index[static_cast<std::size_t>(e)];
            for (std::int64_t c = 0; c < channels; ++c) {
                out[at(out_layout, r, c, out_items, channels)] += w * in[at(in_layout, src, c, in_items, channels)];
            }
        }
    }
}

namespace reference {

void sparse_mix(const SparseMap &map, std::int64_t channels, std::span<const float> in, Layout in_layout,
                std::span<float> out, Layout out_layout) {
    const std::int64_t in_items = map.cols;
    const std::int64_t out_items = map.rows;
    for (std::int64_t r = 0; r < out_items; ++r) {
        for (std::int64_t c = 0; c < channels; ++c) {
            float acc = 0.0f;
            for (auto e = map.offsets[static_cast<std::size_t>(r)]; e < map.offsets[static_cast<std::size_t>(r) + 1]; ++e) {
                acc += map.weight[static_cast<std::size_t>(e)] *
                       in[at(in_layout, map.index[static_cast<std::size_t>(e)], c, in_items, channels)];
            }
            out[at(out_layout, r, c, out_items, channels)] = acc;
        }
    }
}

} // namespace reference

} // namespace stylepoint::kernels
