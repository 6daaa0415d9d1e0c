// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace stylepoint::kernels {

/// Row-compressed sparse weight matrix W [rows x cols]: output item `r`
/// mixes input items `index[offsets[r] .. offsets[r+1])` with `weight`.
///
/// Entries inside a row keep insertion order; kernels accumulate in that
/// order so results do not depend on the thread schedule.
struct SparseMap {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<std::int64_t> offsets{0};
    std::vector<std::int64_t> index;
    std::vector<float> weight;

    void push(std::int64_t col, float w) {
        index.push_back(col);
        weight.push_back(w);
    }
    void end_row() {
        offsets.push_back(static_cast<std::int64_t>(index.size()));
        ++rows;
    }
    std::int64_t nnz() const { return static_cast<std::int64_t>(index.size()); }

    /// W^T with rows visited in ascending input order.
    SparseMap transposed() const;
};

/// Memory layout of an item-by-channel block.
enum class Layout {
    ItemMajor,    ///< [items, channels]
    ChannelMajor, ///< [channels, items]
};

/// out = W * in, with both sides viewed as item-by-channel blocks.
void sparse_mix(const SparseMap &map, std::int64_t channels, std::span<const float> in, Layout in_layout,
                std::span<float> out, Layout out_layout);

namespace reference {
void sparse_mix(const SparseMap &map, std::int64_t channels, std::span<const float> in, Layout in_layout,
                std::span<float> out, Layout out_layout);
}

} // namespace stylepoint::kernels
