// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stgat/data.hpp"
#include "stgat/model.hpp"
#include "stgat/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace stgat {

struct TrainConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 500;
    std::size_t patience = 40;   // consecutive epochs without improvement
    double min_delta = 0.0;      // improvement must exceed this
    std::uint64_t seed = 1;

    void validate() const;
};

/// Mean of squared differences; both inputs are [batch].
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// Per-parameter Adam moments.
struct AdamState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::size_t step = 0;

    static AdamState for_parameters(std::span<Tensor> params);
};

/// One bias-corrected Adam update from the gradients currently stored on the
/// parameters. A parameter without a gradient is treated as having zero
/// gradient; non-finite gradients are an error.
void adam_step(std::span<Tensor> params, AdamState& state, const TrainConfig& cfg);

struct EpochRecord {
    std::size_t epoch;    // 1-based
    double train_mse;
    double val_mse;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    double best_val_mse = 0.0;
    std::size_t best_epoch = 0;
    std::size_t stop_epoch = 0;
    std::string stop_reason; // "early_stopping" or "max_epochs"
};

/// Mini-batch training with seeded shuffles, per-epoch validation, best
/// checkpoint restore and early stopping after `patience` consecutive
/// epochs without improvement. The model is left holding the parameters of
/// the best validation epoch.
TrainResult train(Regressor& model, const WindowedDataset& train_ds, const WindowedDataset& val_ds,
                  const TrainConfig& cfg);

/// Mean squared error of the model on a dataset, computed without recording.
double evaluate_mse(const Regressor& model, const WindowedDataset& ds, std::size_t batch_size);

/// Central-difference check of the MSE-loss gradient with respect to every
/// trainable parameter of the model. `checks_per_tensor` bounds the probed
/// coordinates per parameter (evenly strided; 0 means all). Returns the
/// maximum relative error; the model's values and gradients are restored.
double parameter_gradient_check(Regressor& model, const Tensor& windows, const Tensor& targets,
                                double eps, std::size_t checks_per_tensor = 0);

/// Predictions over a whole dataset (scaled units), batched.
std::vector<double> predict_all(const Regressor& model, const WindowedDataset& ds,
                                std::size_t batch_size);

/// History CSV with header `epoch,train_mse,val_mse`.
void write_history_csv(const TrainResult& result, const std::filesystem::path& path);

} // namespace stgat
