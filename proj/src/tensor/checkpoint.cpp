// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/tensor/checkpoint.hpp"

#include "stylepoint/binary_io.hpp"

#include <fstream>
#include <vector>

namespace stylepoint {

void write_archive(std::ostream &os, const Archive &archive) {
    binary::put_magic(os, kArchiveMagic);
    binary::put<std::uint8_t>(os, kArchiveVersion);
    binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(archive.size()));
    for (const auto &[name, t] : archive) {
        binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dim()));
        for (auto e : t.shape()) {
            binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(e));
        }
        const auto d = t.data();
        os.write(reinterpret_cast<const char *>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(float)));
    }
    if (!os) {
        throw ArchiveError("failed writing archive");
    }
}

Archive read_archive(std::istream &is) {
    if (!binary::check_magic(is, kArchiveMagic)) {
        throw ArchiveError("not a parameter archive (bad magic)");
    }
    const auto version = binary::get<std::uint8_t>(is, "archive version");
    if (version != kArchiveVersion) {
        throw ArchiveError("unsupported archive version " + std::to_string(version));
    }
    const auto count = binary::get<std::uint32_t>(is, "entry count");
    Archive archive;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = binary::get<std::uint32_t>(is, "name length");
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) {
            throw ArchiveError("truncated archive entry name");
        }
        const auto ndim = binary::get<std::uint32_t>(is, "rank");
        Shape shape(ndim);
        for (auto &e : shape) {
            e = binary::get<std::uint32_t>(is, "extent");
        }
        std::vector<float> values(static_cast<std::size_t>(shape_numel(shape)));
        if (!is.read(reinterpret_cast<char *>(values.data()),
                     static_cast<std::streamsize>(values.size() * sizeof(float)))) {
            throw ArchiveError("truncated payload for '" + name + "'");
        }
        archive.emplace(std::move(name), Tensor::from(std::move(shape), std::move(values)));
    }
    return archive;
}

void save_archive(const std::filesystem::path &path, const Archive &archive) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw ArchiveError("cannot open " + path.string() + " for writing");
    }
    write_archive(os, archive);
}

Archive load_archive(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ArchiveError("cannot open checkpoint " + path.string());
    }
    return read_archive(is);
}

} // namespace stylepoint
