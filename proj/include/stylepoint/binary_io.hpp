// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

// Little-endian primitives for the binary file formats.
namespace stylepoint::binary {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <class T> void put(std::ostream &os, T value) {
    os.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

template <class T> T get(std::istream &is, const char *what) {
    T value{};
    if (!is.read(reinterpret_cast<char *>(&value), sizeof(T))) {
        throw std::runtime_error(std::string("truncated input while reading ") + what);
    }
    return value;
}

inline void put_magic(std::ostream &os, const char (&magic)[4]) { os.write(magic, 4); }

inline bool check_magic(std::istream &is, const char (&magic)[4]) {
    char buf[4] = {};
    if (!is.read(buf, 4)) {
        return false;
    }
    return std::memcmp(buf, magic, 4) == 0;
}

} // namespace stylepoint::binary
