// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stgat/data.hpp"
#include "stgat/model.hpp"
#include "stgat/training.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stgat {

double rmse(std::span<const double> pred, std::span<const double> target);
double mae(std::span<const double> pred, std::span<const double> target);

// One evaluated run: metrics are in physical units (inverse-scaled).
struct RunMetrics {
    std::uint64_t seed = 0;
    double rmse = 0.0;
    double mae = 0.0;
    double scaled_test_mse = 0.0;
    double best_val_mse = 0.0;
    std::size_t best_epoch = 0;
    std::size_t stop_epoch = 0;
    std::string stop_reason;
};

struct ReportRow {
    std::string method;
    double rmse_mean = 0.0;
    std::optional<double> rmse_std; // absent for single runs
    double mae_mean = 0.0;
    std::optional<double> mae_std;
    std::size_t num_runs = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<RunMetrics> runs;
};

struct EvalReport {
    std::vector<ReportRow> rows;

    /// CSV with header method,rmse_mean,rmse_std,mae_mean,mae_std,num_runs,seeds
    /// at full precision; the seeds field is semicolon separated.
    std::string to_csv() const;

    /// Aligned text table with "mean ± std" cells (3 and 2 decimals), matching
    /// the published layout. The std column is population standard deviation.
    std::string to_table() const;
};

using RegressorBuilder = std::function<std::unique_ptr<Regressor>(std::uint64_t seed)>;

/// Trains one model per seed (or fits once for closed-form models), evaluates
/// on the shared test split and aggregates mean and population standard
/// deviation. When artifact_dir is non-empty, per-run metrics are persisted
/// under <artifact_dir>/<method-slug>/seed_<seed>/metrics.json.
ReportRow multi_run(const RegressorBuilder& builder, const PreparedData& data,
                    const TrainConfig& train_cfg, std::span<const std::uint64_t> seeds,
                    const std::filesystem::path& artifact_dir = {},
                    const std::string& method = "");

/// Runs all four ablation variants with identical data, seeds and training
/// config; rows come out in the published ablation order with the full model
/// last.
EvalReport run_ablation(const PreparedData& data, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg, std::span<const std::uint64_t> seeds,
                        const std::filesystem::path& artifact_dir = {});

/// Filesystem-safe method directory name ("w/o Both GATv2" -> "wo_both_gatv2").
std::string method_slug(const std::string& method);

/// Reads back a persisted per-run metrics file.
RunMetrics read_run_metrics(const std::filesystem::path& path);

inline const std::vector<std::uint64_t> kDefaultSeeds{1, 2, 3, 4, 5};

} // namespace stgat
