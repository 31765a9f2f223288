// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace stgat {

/// CRC-32 (IEEE polynomial, reflected).
std::uint32_t crc32(std::span<const unsigned char> data, std::uint32_t seed = 0);

std::uint32_t crc32_file(const std::filesystem::path& path);

/// Lower-case 8-digit hex form.
std::string crc32_hex(std::uint32_t value);

} // namespace stgat
