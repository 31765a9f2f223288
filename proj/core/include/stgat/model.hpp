// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stgat/data.hpp"
#include "stgat/gat.hpp"
#include "stgat/layers.hpp"
#include "stgat/tensor.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace stgat {

// Architecture hyperparameters. The two use_* flags select the ablation
// variants; everything else is shared across them.
struct ModelConfig {
    std::size_t window_len = 4;
    std::size_t num_channels = 7;
    std::size_t conv_out_channels = 32;
    std::size_t conv_kernel_size = 3; // odd, applied with same padding
    std::size_t gat_out_dim = 32;
    std::size_t gat_heads = 1;
    std::size_t lstm_hidden = 64;
    std::vector<std::size_t> fc_hidden_dims = {32};
    bool use_temporal_gat = true;
    bool use_spatial_gat = true;
    double leaky_slope = kDefaultLeakySlope;
    std::uint64_t seed = 1;

    void validate() const;
};

// Common surface for everything the training loop and the evaluation harness
// run: predict a scalar per window.
class Regressor {
public:
    virtual ~Regressor() = default;

    /// [batch x window_len x channels] -> [batch]
    virtual Tensor forward(const Tensor& windows) const = 0;

    virtual std::span<Tensor> parameters() = 0;
    virtual std::string name() const = 0;

    /// False for closed-form models that are fitted rather than trained.
    virtual bool trainable() const { return true; }

    /// Closed-form fit; only meaningful when trainable() is false.
    virtual void fit(const WindowedDataset&);

    std::size_t parameter_count();
};

// The spatial-temporal graph-attention fusion model. Per window:
//   conv over the temporal axis (channels as conv channels)
//   -> temporal GATv2 over time-step nodes (features: conv output per step)
//   -> spatial GATv2 over channel nodes (features: each channel's series),
//      mean-pooled over nodes into one per-window summary
//   -> per-step concat [conv || temporal || spatial summary]
//   -> LSTM -> layer norm -> LSTM -> fully connected head -> scalar.
// Disabled branches are omitted entirely: their parameters do not exist and
// the concatenated width shrinks by gat_out_dim * gat_heads per branch.
class FusionModel : public Regressor {
public:
    explicit FusionModel(const ModelConfig& config);

    Tensor forward(const Tensor& windows) const override;
    std::span<Tensor> parameters() override { return params_; }
    std::string name() const override { return "STGAT-Fuser"; }

    const ModelConfig& config() const { return config_; }

    const Conv1dLayer& conv() const { return conv_; }
    std::span<const Gatv2Layer> temporal_heads() const { return temporal_heads_; }
    std::span<const Gatv2Layer> spatial_heads() const { return spatial_heads_; }
    const LstmLayer& lstm1() const { return lstm1_; }
    const LstmLayer& lstm2() const { return lstm2_; }
    const LayerNormLayer& norm() const { return norm_; }
    std::span<const LinearLayer> head() const { return head_; }

    /// Stable names matching parameters() order, used by the model file.
    std::vector<std::string> parameter_names() const;

private:
    ModelConfig config_;
    Conv1dLayer conv_;
    std::vector<Gatv2Layer> temporal_heads_;
    std::vector<Gatv2Layer> spatial_heads_;
    Graph temporal_graph_;
    Graph spatial_graph_;
    LstmLayer lstm1_;
    LayerNormLayer norm_;
    LstmLayer lstm2_;
    std::vector<LinearLayer> head_;
    std::vector<Tensor> params_;
};

std::unique_ptr<FusionModel> build_model(const ModelConfig& config);

enum class BaselineKind {
    Mlr,
    Mlp,
    Cnn,
    Lstm,
};

const char* baseline_name(BaselineKind kind);
std::optional<BaselineKind> baseline_from_name(const std::string& name);

/// MLR solves regularized normal equations in closed form; MLP, CNN and LSTM
/// reuse the layer library and train through the shared loop. Width and depth
/// come from the matching ModelConfig fields.
std::unique_ptr<Regressor> build_baseline(BaselineKind kind, const ModelConfig& config);

// Multiple linear regression on flattened windows, exposed for the
// coefficient oracle checks.
class MlrModel : public Regressor {
public:
    explicit MlrModel(const ModelConfig& config);

    Tensor forward(const Tensor& windows) const override;
    std::span<Tensor> parameters() override { return {}; }
    std::string name() const override { return "MLR"; }
    bool trainable() const override { return false; }

    /// Least squares with ridge term 1e-8 on the normal equations.
    void fit(const WindowedDataset& train) override;

    /// Flattened-window coefficients followed by the intercept.
    const std::vector<double>& coefficients() const { return beta_; }

private:
    std::size_t window_len_;
    std::size_t num_channels_;
    std::vector<double> beta_;
};

/// The four ablation rows: the full model plus the three reduced variants,
/// differing only in the two GAT flags.
std::vector<std::pair<std::string, ModelConfig>> ablation_variants(const ModelConfig& base);

} // namespace stgat
