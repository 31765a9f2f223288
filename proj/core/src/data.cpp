// SPDX-License-Identifier: Apache-2.0
#include "stgat/data.hpp"

#include "stgat/errors.hpp"
#include "stgat/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace stgat {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return "";
    }
    std::size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        fields.push_back(trim(field));
    }
    if (!line.empty() && line.back() == ',') {
        fields.push_back("");
    }
    return fields;
}

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = static_cast<unsigned>(y - era * 400);
    unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = static_cast<unsigned>(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

} // namespace

std::int64_t parse_timestamp(const std::string& text) {
    std::string s = trim(text);
    if (s.empty()) {
        throw ValueError("timestamp: empty value");
    }
    bool integral = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(std::isdigit(static_cast<unsigned char>(s[i])) || (i == 0 && s[i] == '-'))) {
            integral = false;
            break;
        }
    }
    if (integral) {
        try {
            return std::stoll(s);
        } catch (const std::exception&) {
            throw ValueError("timestamp: cannot parse '" + s + "'");
        }
    }
    // ISO-8601: YYYY-MM-DD[T ]HH:MM:SS with optional trailing Z.
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    char sep = 0;
    int consumed = 0;
    int got = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d%n", &year, &month, &day, &sep, &hour,
                          &minute, &second, &consumed);
    if (got != 7 || (sep != 'T' && sep != ' ')) {
        throw ValueError("timestamp: cannot parse '" + s + "'");
    }
    std::string rest = trim(s.substr(static_cast<std::size_t>(consumed)));
    if (!rest.empty() && rest != "Z") {
        throw ValueError("timestamp: unsupported suffix in '" + s + "'");
    }
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 ||
        second > 60) {
        throw ValueError("timestamp: out-of-range field in '" + s + "'");
    }
    std::int64_t days = days_from_civil(year, static_cast<unsigned>(month),
                                        static_cast<unsigned>(day));
    return days * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp_utc(std::int64_t epoch_seconds) {
    std::int64_t days = epoch_seconds / 86400;
    std::int64_t rem = epoch_seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    std::int64_t year = 0;
    unsigned month = 0, day = 0;
    civil_from_days(days, year, month, day);
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(year), month, day, static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60), static_cast<long long>(rem % 60));
    return buffer;
}

std::string CsvSchema::header_line() const {
    std::string line = timestamp_name;
    for (const std::string& name : channel_names) {
        line += "," + name;
    }
    line += "," + target_name;
    return line;
}

RawSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("load_csv: cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("load_csv: " + path.string() + " is empty");
    }
    if (trim(line) != schema.header_line()) {
        throw FormatError("load_csv: header mismatch in " + path.string() + ": expected '" +
                          schema.header_line() + "', got '" + trim(line) + "'");
    }

    struct Row {
        std::int64_t timestamp;
        std::vector<double> values; // channels then target
    };
    std::vector<Row> rows;
    std::size_t dropped = 0;
    std::size_t line_number = 1;
    std::size_t columns = schema.num_columns();
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_fields(line);
        if (fields.size() != columns) {
            throw ValueError("load_csv: line " + std::to_string(line_number) + ": expected " +
                             std::to_string(columns) + " fields, got " +
                             std::to_string(fields.size()));
        }
        bool missing = false;
        for (const std::string& f : fields) {
            if (f.empty()) {
                missing = true;
                break;
            }
        }
        if (missing) {
            ++dropped;
            continue;
        }
        Row row;
        try {
            row.timestamp = parse_timestamp(fields[0]);
        } catch (const ValueError& e) {
            throw ValueError("load_csv: line " + std::to_string(line_number) + ": " + e.what());
        }
        row.values.reserve(columns - 1);
        for (std::size_t i = 1; i < columns; ++i) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(fields[i], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != fields[i].size() || !std::isfinite(v)) {
                throw ValueError("load_csv: line " + std::to_string(line_number) +
                                 ": malformed value '" + fields[i] + "'");
            }
            row.values.push_back(v);
        }
        rows.push_back(std::move(row));
    }

    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.timestamp < b.timestamp; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].timestamp == rows[i - 1].timestamp) {
            throw ValueError("load_csv: duplicate timestamp " +
                             format_timestamp_utc(rows[i].timestamp));
        }
    }

    RawSeries series;
    series.channel_names = schema.channel_names;
    series.dropped_rows = dropped;
    std::size_t nch = schema.channel_names.size();
    series.timestamps.reserve(rows.size());
    series.channels.reserve(rows.size() * nch);
    series.target.reserve(rows.size());
    for (const Row& row : rows) {
        series.timestamps.push_back(row.timestamp);
        for (std::size_t c = 0; c < nch; ++c) {
            series.channels.push_back(row.values[c]);
        }
        series.target.push_back(row.values[nch]);
    }
    return series;
}

void write_csv(const RawSeries& series, const std::filesystem::path& path,
               const CsvSchema& schema) {
    if (series.num_channels() != schema.channel_names.size()) {
        throw ValueError("write_csv: series has " + std::to_string(series.num_channels()) +
                         " channels, schema expects " +
                         std::to_string(schema.channel_names.size()));
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("write_csv: cannot open " + path.string() + " for writing");
    }
    out << schema.header_line() << '\n';
    char buffer[32];
    for (std::size_t t = 0; t < series.length(); ++t) {
        out << format_timestamp_utc(series.timestamps[t]);
        for (std::size_t c = 0; c < series.num_channels(); ++c) {
            std::snprintf(buffer, sizeof(buffer), "%.6f", series.channel_at(t, c));
            out << ',' << buffer;
        }
        std::snprintf(buffer, sizeof(buffer), "%.6f", series.target[t]);
        out << ',' << buffer << '\n';
    }
    if (!out) {
        throw IoError("write_csv: failed writing " + path.string());
    }
}

// --- synthetic corpus ---------------------------------------------------------

void SynthParams::validate() const {
    if (length < 14) {
        throw ValueError("synthesize: length must be at least 14 (window size 4 plus margin)");
    }
    if (step_seconds <= 0) {
        throw ValueError("synthesize: step_seconds must be positive");
    }
    if (ozone_diurnal_amp <= 0.0 && ozone_drift_amp <= 0.0 && ozone_ar_sigma <= 0.0) {
        throw ValueError("synthesize: degenerate parameters, latent signal has no variance");
    }
    if (ozone_ar_coeff < 0.0 || ozone_ar_coeff >= 1.0) {
        throw ValueError("synthesize: ozone_ar_coeff must lie in [0, 1)");
    }
}

RawSeries synthesize(const SynthParams& params, std::uint64_t seed) {
    params.validate();
    Rng rng(seed);
    std::size_t n = params.length;

    // Latent signals first so channels can look back in time. Drift periods
    // are a few days so every chronological split sees every phase.
    std::vector<double> ozone(n), temp(n), rh(n);
    double ar = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        double hours = static_cast<double>(t);
        double diurnal = std::sin(2.0 * std::numbers::pi * (hours - 14.0) / 24.0);
        double drift =
            params.ozone_drift_amp * std::sin(2.0 * std::numbers::pi * hours / (24.0 * 5.0));
        ar = params.ozone_ar_coeff * ar + rng.gaussian() * params.ozone_ar_sigma;
        ozone[t] = std::max(2.0, params.ozone_base + params.ozone_diurnal_amp * diurnal + drift + ar);

        double temp_diurnal = std::sin(2.0 * std::numbers::pi * (hours - 15.0) / 24.0);
        double swing = 3.0 * std::sin(2.0 * std::numbers::pi * hours / (24.0 * 4.0));
        temp[t] = params.temp_base + params.temp_diurnal_amp * temp_diurnal + swing +
                  rng.gaussian() * params.temp_noise;

        rh[t] = std::clamp(params.rh_base - params.rh_diurnal_amp * temp_diurnal +
                               rng.gaussian() * params.rh_noise,
                           12.0, 99.0);
    }

    // Channel personalities: temperature setpoint of the gain curve, gain
    // span, response lag, humidity cross-talk, offset, and the rail level a
    // saturated sensor pins to while it drops out.
    constexpr double kTheta[4] = {16.0, 20.0, 24.0, 28.0};
    constexpr double kGainBase[4] = {0.45, 0.55, 0.35, 0.60};
    constexpr double kGainSpan[4] = {0.90, 0.80, 1.00, 0.70};
    constexpr std::size_t kLag[4] = {0, 1, 1, 2};
    constexpr double kHumidity[4] = {-0.25, 0.20, -0.15, 0.30};
    constexpr double kOffset[4] = {8.0, -5.0, 12.0, 3.0};
    constexpr double kRail[4] = {4.0, 2.5, 6.0, 3.0};

    // Each MOX sensor saturates in stretches (mean 40 h up, 10 h down). While
    // down it pins to its rail and carries no ozone information, so the
    // informative channel subset changes from window to window.
    bool valid[4] = {true, true, true, true};

    RawSeries series;
    series.channel_names = CsvSchema{}.channel_names;
    series.timestamps.resize(n);
    series.channels.resize(n * series.num_channels());
    series.target.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        series.timestamps[t] = params.start_epoch + static_cast<std::int64_t>(t) * params.step_seconds;
        double* row = series.channels.data() + t * series.num_channels();
        for (std::size_t i = 0; i < 4; ++i) {
            double flip = rng.uniform();
            if (valid[i] ? flip < 1.0 / 40.0 : flip < 1.0 / 10.0) {
                valid[i] = !valid[i];
            }
            if (valid[i]) {
                std::size_t lagged = t >= kLag[i] ? t - kLag[i] : 0;
                double gate = 1.0 / (1.0 + std::exp(-(temp[t] - kTheta[i]) / 2.0));
                double gain = kGainBase[i] + kGainSpan[i] * gate;
                row[i] = gain * ozone[lagged] + kHumidity[i] * (rh[t] - params.rh_base) +
                         kOffset[i] + rng.gaussian() * params.mox_noise;
            } else {
                row[i] = kRail[i] + rng.gaussian() * 0.5;
            }
        }
        double ec_drift = params.ec_drift_amp *
                          std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / (24.0 * 3.0) + 1.0);
        row[4] = 0.95 * ozone[t] + ec_drift + rng.gaussian() * params.ec_noise;
        row[5] = temp[t];
        row[6] = rh[t];
        series.target[t] = ozone[t];
    }
    return series;
}

// --- chronological split -------------------------------------------------------

SplitSeries chrono_split(const RawSeries& series, SplitFractions fractions,
                         std::size_t window_len) {
    if (fractions.train <= 0.0 || fractions.val <= 0.0 || fractions.test <= 0.0) {
        throw ValueError("chrono_split: fractions must be positive");
    }
    double sum = fractions.train + fractions.val + fractions.test;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ValueError("chrono_split: fractions must sum to 1");
    }
    std::size_t n = series.length();
    std::size_t train_end = static_cast<std::size_t>(std::floor(fractions.train * static_cast<double>(n)));
    std::size_t val_end = static_cast<std::size_t>(
        std::floor((fractions.train + fractions.val) * static_cast<double>(n)));

    auto section = [&](std::size_t begin, std::size_t end) {
        RawSeries out;
        out.channel_names = series.channel_names;
        std::size_t nch = series.num_channels();
        out.timestamps.assign(series.timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                              series.timestamps.begin() + static_cast<std::ptrdiff_t>(end));
        out.channels.assign(series.channels.begin() + static_cast<std::ptrdiff_t>(begin * nch),
                            series.channels.begin() + static_cast<std::ptrdiff_t>(end * nch));
        out.target.assign(series.target.begin() + static_cast<std::ptrdiff_t>(begin),
                          series.target.begin() + static_cast<std::ptrdiff_t>(end));
        return out;
    };

    SplitSeries splits{section(0, train_end), section(train_end, val_end), section(val_end, n)};
    const char* names[3] = {"train", "val", "test"};
    const RawSeries* parts[3] = {&splits.train, &splits.val, &splits.test};
    for (int i = 0; i < 3; ++i) {
        if (parts[i]->length() < window_len) {
            throw ValueError("chrono_split: " + std::string(names[i]) + " split has " +
                             std::to_string(parts[i]->length()) + " steps, shorter than window " +
                             std::to_string(window_len));
        }
    }
    return splits;
}

// --- scaling -------------------------------------------------------------------

ScalerParams fit_scaler(const RawSeries& train) {
    if (train.length() == 0) {
        throw ValueError("fit_scaler: empty training split");
    }
    std::size_t nch = train.num_channels();
    ScalerParams params;
    params.channel_min.assign(nch, std::numeric_limits<double>::infinity());
    params.channel_max.assign(nch, -std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < train.length(); ++t) {
        for (std::size_t c = 0; c < nch; ++c) {
            double v = train.channel_at(t, c);
            params.channel_min[c] = std::min(params.channel_min[c], v);
            params.channel_max[c] = std::max(params.channel_max[c], v);
        }
    }
    for (std::size_t c = 0; c < nch; ++c) {
        if (params.channel_max[c] <= params.channel_min[c]) {
            throw ValueError("fit_scaler: channel " + train.channel_names[c] +
                             " is constant on the training split");
        }
    }
    auto [mn, mx] = std::minmax_element(train.target.begin(), train.target.end());
    params.target_min = *mn;
    params.target_max = *mx;
    if (params.target_max <= params.target_min) {
        throw ValueError("fit_scaler: target is constant on the training split");
    }
    return params;
}

namespace {
double scale_value(double x, double mn, double mx) {
    return (x - mn) / (mx - mn);
}
} // namespace

RawSeries apply_scaler(const RawSeries& series, const ScalerParams& params) {
    std::size_t nch = series.num_channels();
    if (params.channel_min.size() != nch) {
        throw ValueError("apply_scaler: params cover " + std::to_string(params.channel_min.size()) +
                         " channels, series has " + std::to_string(nch));
    }
    RawSeries out = series;
    for (std::size_t t = 0; t < series.length(); ++t) {
        for (std::size_t c = 0; c < nch; ++c) {
            out.channels[t * nch + c] =
                scale_value(series.channel_at(t, c), params.channel_min[c], params.channel_max[c]);
        }
        out.target[t] = scale_value(series.target[t], params.target_min, params.target_max);
    }
    return out;
}

double scale_target(double raw, const ScalerParams& params) {
    return scale_value(raw, params.target_min, params.target_max);
}

double unscale_target(double scaled, const ScalerParams& params) {
    return params.target_min + scaled * (params.target_max - params.target_min);
}

// --- windowing -------------------------------------------------------------------

WindowedDataset make_windows(const RawSeries& scaled, std::size_t window_len, std::size_t stride) {
    if (window_len == 0 || stride == 0) {
        throw ValueError("make_windows: window_len and stride must be positive");
    }
    std::size_t n = scaled.length();
    if (n < window_len) {
        throw ValueError("make_windows: split of length " + std::to_string(n) +
                         " is shorter than window " + std::to_string(window_len));
    }
    std::size_t count = (n - window_len) / stride + 1;
    std::size_t nch = scaled.num_channels();

    std::vector<double> windows;
    windows.reserve(count * window_len * nch);
    std::vector<double> targets;
    targets.reserve(count);
    std::vector<std::size_t> starts;
    starts.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        std::size_t begin = w * stride;
        starts.push_back(begin);
        windows.insert(windows.end(), scaled.channels.begin() + static_cast<std::ptrdiff_t>(begin * nch),
                       scaled.channels.begin() + static_cast<std::ptrdiff_t>((begin + window_len) * nch));
        targets.push_back(scaled.target[begin + window_len - 1]);
    }

    WindowedDataset ds;
    ds.windows = Tensor::from_values({count, window_len, nch}, std::move(windows));
    ds.targets = Tensor::from_values({count}, std::move(targets));
    ds.start_indices = std::move(starts);
    return ds;
}

PreparedData prepare(const RawSeries& series, std::size_t window_len, std::size_t stride,
                     SplitFractions fractions) {
    SplitSeries splits = chrono_split(series, fractions, window_len);
    PreparedData data;
    data.scaler = fit_scaler(splits.train);
    data.train = make_windows(apply_scaler(splits.train, data.scaler), window_len, stride);
    data.val = make_windows(apply_scaler(splits.val, data.scaler), window_len, stride);
    data.test = make_windows(apply_scaler(splits.test, data.scaler), window_len, stride);
    return data;
}

} // namespace stgat
