// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stgat/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace stgat {

// Column layout of a sensor-node corpus. The default schema matches the
// documented CSV format:
//   timestamp,mox1,mox2,mox3,mox4,ec,temp,rh,ref_o3
// with ISO-8601 or integer epoch-second timestamps.
struct CsvSchema {
    std::vector<std::string> channel_names = {"mox1", "mox2", "mox3", "mox4",
                                              "ec",   "temp", "rh"};
    std::string timestamp_name = "timestamp";
    std::string target_name = "ref_o3";

    std::string header_line() const;
    std::size_t num_columns() const { return channel_names.size() + 2; }
};

// Hourly multichannel series with a reference target, chronologically sorted.
struct RawSeries {
    std::vector<std::int64_t> timestamps;    // epoch seconds, strictly increasing
    std::vector<std::string> channel_names;
    std::vector<double> channels;            // row-major [time x channels]
    std::vector<double> target;              // reference concentration per step
    std::size_t dropped_rows = 0;            // rows removed for missing values

    std::size_t length() const { return timestamps.size(); }
    std::size_t num_channels() const { return channel_names.size(); }
    double channel_at(std::size_t t, std::size_t c) const {
        return channels[t * num_channels() + c];
    }
};

/// Epoch seconds from "YYYY-MM-DDTHH:MM:SS[Z]", "YYYY-MM-DD HH:MM:SS" or a
/// plain integer.
std::int64_t parse_timestamp(const std::string& text);
std::string format_timestamp_utc(std::int64_t epoch_seconds);

/// Parses, sorts chronologically and drops rows with missing cells (the drop
/// count is reported on the result). Duplicate timestamps are an error.
RawSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

void write_csv(const RawSeries& series, const std::filesystem::path& path,
               const CsvSchema& schema = {});

// Controls for the synthetic corpus generator. The generated target is the
// latent ozone signal; the channels observe it through channel-specific
// temperature-dependent gains, lags, humidity cross-talk and noise, so that
// recovering it rewards models that fuse channels and temporal context.
struct SynthParams {
    std::size_t length = 2000;
    std::int64_t start_epoch = 1496275200; // 2017-06-01T00:00:00Z
    std::int64_t step_seconds = 3600;

    double ozone_base = 58.0;
    double ozone_diurnal_amp = 26.0;
    double ozone_drift_amp = 12.0;
    double ozone_ar_coeff = 0.9;
    double ozone_ar_sigma = 2.2;

    double temp_base = 21.0;
    double temp_diurnal_amp = 7.0;
    double temp_noise = 0.7;

    double rh_base = 62.0;
    double rh_diurnal_amp = 16.0;
    double rh_noise = 2.5;

    double mox_noise = 3.0;
    double ec_noise = 1.5;
    double ec_drift_amp = 7.0;

    void validate() const;
};

RawSeries synthesize(const SynthParams& params, std::uint64_t seed);

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct SplitSeries {
    RawSeries train;
    RawSeries val;
    RawSeries test;
};

/// Contiguous prefix/middle/suffix split in time order; boundaries at
/// floor(train*N) and floor((train+val)*N). Errors when any split is shorter
/// than window_len.
SplitSeries chrono_split(const RawSeries& series, SplitFractions fractions,
                         std::size_t window_len);

// Per-channel min-max parameters fitted on the training split only.
struct ScalerParams {
    std::vector<double> channel_min;
    std::vector<double> channel_max;
    double target_min = 0.0;
    double target_max = 0.0;
};

ScalerParams fit_scaler(const RawSeries& train);

/// (x - min) / (max - min) per channel and for the target. Values outside the
/// training range pass through unclipped.
RawSeries apply_scaler(const RawSeries& series, const ScalerParams& params);

double scale_target(double raw, const ScalerParams& params);
double unscale_target(double scaled, const ScalerParams& params);

// Sliding windows over a scaled split; the target aligns with each window's
// last time step.
struct WindowedDataset {
    Tensor windows;  // [count x window_len x channels]
    Tensor targets;  // [count]
    std::vector<std::size_t> start_indices;

    std::size_t size() const { return start_indices.size(); }
    std::size_t window_len() const { return windows.shape()[1]; }
    std::size_t num_channels() const { return windows.shape()[2]; }
};

WindowedDataset make_windows(const RawSeries& scaled, std::size_t window_len = 4,
                             std::size_t stride = 1);

// Full preprocessing pipeline: split -> fit scaler on train -> scale each
// split -> window each split.
struct PreparedData {
    ScalerParams scaler;
    WindowedDataset train;
    WindowedDataset val;
    WindowedDataset test;
};

PreparedData prepare(const RawSeries& series, std::size_t window_len, std::size_t stride = 1,
                     SplitFractions fractions = {});

} // namespace stgat
