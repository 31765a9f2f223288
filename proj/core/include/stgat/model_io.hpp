// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stgat/data.hpp"
#include "stgat/model.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace stgat {

// Model container format ("STGF"): a little-endian binary file holding a
// format version, a JSON header (ModelConfig plus the blob directory), the
// named parameter blobs as raw 64-bit floats in row-major order, and a
// trailing CRC-32 over everything before it. Round trips are bit exact.

struct LoadedModel {
    std::unique_ptr<FusionModel> model;
    std::optional<ScalerParams> scaler;
};

void save_model(const FusionModel& model, const std::optional<ScalerParams>& scaler,
                const std::filesystem::path& path);

/// Validates magic, version and checksum before constructing anything; a
/// truncated or corrupt file never yields a partial model.
LoadedModel load_model(const std::filesystem::path& path);

} // namespace stgat
