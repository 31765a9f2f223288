// SPDX-License-Identifier: Apache-2.0
#include "stgat/checksum.hpp"

#include "stgat/errors.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <vector>

namespace stgat {

namespace {

std::array<std::uint32_t, 256> make_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int bit = 0; bit < 8; ++bit) {
            c = (c & 1U) ? 0xEDB88320U ^ (c >> 1) : c >> 1;
        }
        table[i] = c;
    }
    return table;
}

const std::array<std::uint32_t, 256>& table() {
    static const auto t = make_table();
    return t;
}

} // namespace

std::uint32_t crc32(std::span<const unsigned char> data, std::uint32_t seed) {
    std::uint32_t c = seed ^ 0xFFFFFFFFU;
    const auto& t = table();
    for (unsigned char byte : data) {
        c = t[(c ^ byte) & 0xFFU] ^ (c >> 8);
    }
    return c ^ 0xFFFFFFFFU;
}

std::uint32_t crc32_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("crc32_file: cannot open " + path.string());
    }
    std::vector<unsigned char> buffer(1 << 16);
    std::uint32_t c = 0;
    while (in) {
        in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
        std::streamsize got = in.gcount();
        if (got > 0) {
            c = crc32(std::span<const unsigned char>(buffer.data(), static_cast<std::size_t>(got)), c);
        }
    }
    return c;
}

std::string crc32_hex(std::uint32_t value) {
    char buffer[16];
    std::snprintf(buffer, sizeof(buffer), "%08x", value);
    return buffer;
}

} // namespace stgat
