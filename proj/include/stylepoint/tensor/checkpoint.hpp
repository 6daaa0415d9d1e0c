// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/tensor/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>

namespace stylepoint {

/// Named tensors keyed by parameter path ("encoder.stage0.layer0.weight").
using Archive = std::map<std::string, Tensor>;

inline constexpr char kArchiveMagic[4] = {'S', 'P', 'C', 'K'};
inline constexpr std::uint8_t kArchiveVersion = 1;

class ArchiveError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Layout (all integers little-endian):
//   "SPCK" u8 version u32 count
//   count x { u32 name_len, name bytes, u32 ndim, ndim x u32 extent,
//             numel x f32 }
// Entries are written in name order.
void write_archive(std::ostream &os, const Archive &archive);
Archive read_archive(std::istream &is);

void save_archive(const std::filesystem::path &path, const Archive &archive);
Archive load_archive(const std::filesystem::path &path);

} // namespace stylepoint
