// SPDX-License-Identifier: Apache-2.0
#include "stgat/model.hpp"

#include "stgat/errors.hpp"

#include <algorithm>
#include <cmath>

namespace stgat {

void Regressor::fit(const WindowedDataset&) {
    throw ValueError(name() + ": fit is only available on closed-form models");
}

std::size_t Regressor::parameter_count() {
    std::size_t n = 0;
    for (const Tensor& p : parameters()) {
        n += p.size();
    }
    return n;
}

void ModelConfig::validate() const {
    if (window_len == 0 || num_channels == 0 || conv_out_channels == 0 || gat_out_dim == 0 ||
        gat_heads == 0 || lstm_hidden == 0) {
        throw ValueError("ModelConfig: all dimensions must be at least 1");
    }
    if (conv_kernel_size == 0 || conv_kernel_size % 2 == 0) {
        throw ValueError("ModelConfig: conv_kernel_size must be odd for same padding");
    }
    for (std::size_t dim : fc_hidden_dims) {
        if (dim == 0) {
            throw ValueError("ModelConfig: fc_hidden_dims entries must be at least 1");
        }
    }
    if (leaky_slope < 0.0 || leaky_slope >= 1.0) {
        throw ValueError("ModelConfig: leaky_slope must lie in [0, 1)");
    }
}

// --- FusionModel ---------------------------------------------------------------

FusionModel::FusionModel(const ModelConfig& config) : config_(config) {
    config_.validate();
    Rng rng(config_.seed);
    std::size_t padding = (config_.conv_kernel_size - 1) / 2;

    // Construction order is fixed; it defines how the seeded stream is spent
    // and therefore the on-disk parameter order.
    conv_ = Conv1dLayer::init(config_.num_channels, config_.conv_out_channels,
                              config_.conv_kernel_size, padding, rng);

    std::size_t branch_dim = config_.gat_out_dim * config_.gat_heads;
    std::size_t fused_width = config_.conv_out_channels;
    if (config_.use_temporal_gat) {
        temporal_graph_ = Graph::complete(config_.window_len, true);
        for (std::size_t h = 0; h < config_.gat_heads; ++h) {
            temporal_heads_.push_back(Gatv2Layer::init(config_.conv_out_channels,
                                                       config_.gat_out_dim, config_.gat_out_dim,
                                                       config_.leaky_slope, rng));
        }
        fused_width += branch_dim;
    }
    if (config_.use_spatial_gat) {
        spatial_graph_ = Graph::complete(config_.num_channels, true);
        for (std::size_t h = 0; h < config_.gat_heads; ++h) {
            spatial_heads_.push_back(Gatv2Layer::init(config_.window_len, config_.gat_out_dim,
                                                      config_.gat_out_dim, config_.leaky_slope,
                                                      rng));
        }
        fused_width += branch_dim;
    }

    lstm1_ = LstmLayer::init(fused_width, config_.lstm_hidden, rng);
    norm_ = LayerNormLayer::init(config_.lstm_hidden);
    lstm2_ = LstmLayer::init(config_.lstm_hidden, config_.lstm_hidden, rng);

    std::size_t in_dim = config_.lstm_hidden;
    for (std::size_t dim : config_.fc_hidden_dims) {
        head_.push_back(LinearLayer::init(in_dim, dim, rng));
        in_dim = dim;
    }
    head_.push_back(LinearLayer::init(in_dim, 1, rng));

    auto collect = [this](const std::vector<Tensor>& tensors) {
        params_.insert(params_.end(), tensors.begin(), tensors.end());
    };
    collect(conv_.parameters());
    for (const auto& head : temporal_heads_) collect(head.parameters());
    for (const auto& head : spatial_heads_) collect(head.parameters());
    collect(lstm1_.parameters());
    collect(norm_.parameters());
    collect(lstm2_.parameters());
    for (const auto& layer : head_) collect(layer.parameters());
}

std::vector<std::string> FusionModel::parameter_names() const {
    // Must mirror the collection order in the constructor.
    std::vector<std::string> names{"conv.kernel", "conv.bias"};
    auto gat_names = [&names](const std::string& prefix, std::size_t count) {
        for (std::size_t h = 0; h < count; ++h) {
            std::string base = prefix + "." + std::to_string(h) + ".";
            names.push_back(base + "attn_weight");
            names.push_back(base + "attn_vector");
            names.push_back(base + "value_weight");
        }
    };
    auto lstm_names = [&names](const std::string& base) {
        names.push_back(base + ".weight_input");
        names.push_back(base + ".weight_hidden");
        names.push_back(base + ".bias");
    };
    gat_names("temporal_gat", temporal_heads_.size());
    gat_names("spatial_gat", spatial_heads_.size());
    lstm_names("lstm1");
    names.push_back("norm.gain");
    names.push_back("norm.offset");
    lstm_names("lstm2");
    for (std::size_t i = 0; i < head_.size(); ++i) {
        names.push_back("head." + std::to_string(i) + ".weight");
        names.push_back("head." + std::to_string(i) + ".bias");
    }
    return names;
}

namespace {

void check_windows(const char* what, const Tensor& x, std::size_t window_len,
                   std::size_t channels) {
    if (x.rank() != 3 || x.shape()[1] != window_len || x.shape()[2] != channels) {
        throw ShapeError(std::string(what) + ": expected [batch x " + std::to_string(window_len) +
                         " x " + std::to_string(channels) + "], got " + shape_str(x.shape()));
    }
}

Tensor branch_concat(const std::vector<Gatv2Layer>& heads, const Tensor& features,
                     const Graph& graph) {
    if (heads.size() == 1) {
        return heads[0].forward_batch(features, graph);
    }
    std::vector<Tensor> outputs;
    outputs.reserve(heads.size());
    for (const Gatv2Layer& head : heads) {
        outputs.push_back(head.forward_batch(features, graph));
    }
    return concat(outputs, 2);
}

} // namespace

Tensor FusionModel::forward(const Tensor& windows) const {
    check_windows("forward", windows, config_.window_len, config_.num_channels);
    std::size_t batch = windows.shape()[0];

    Tensor by_channel = swap_last_axes(windows);          // [B x C x L]
    Tensor conv_out = conv_.forward(by_channel);          // [B x F x L]
    Tensor per_step = swap_last_axes(conv_out);           // [B x L x F]

    std::vector<Tensor> parts{per_step};
    if (!temporal_heads_.empty()) {
        parts.push_back(branch_concat(temporal_heads_, per_step, temporal_graph_));
    }
    if (!spatial_heads_.empty()) {
        Tensor spatial = branch_concat(spatial_heads_, by_channel, spatial_graph_); // [B x C x G]
        Tensor summary = reshape(mean_axis(spatial, 1),
                                 {batch, std::size_t{1}, config_.gat_out_dim * config_.gat_heads});
        std::vector<Tensor> tiled(config_.window_len, summary);
        parts.push_back(concat(tiled, 1)); // [B x L x G]
    }
    Tensor fused = parts.size() == 1 ? parts[0] : concat(parts, 2);

    LstmLayer::Output first = lstm1_.forward(fused);
    Tensor normalized = norm_.forward(first.sequence);
    LstmLayer::Output second = lstm2_.forward(normalized);

    Tensor out = second.hidden;
    for (std::size_t i = 0; i < head_.size(); ++i) {
        out = head_[i].forward(out);
        if (i + 1 < head_.size()) {
            out = leaky_relu(out, config_.leaky_slope);
        }
    }
    return reshape(out, {batch});
}

std::unique_ptr<FusionModel> build_model(const ModelConfig& config) {
    return std::make_unique<FusionModel>(config);
}

// --- baselines -------------------------------------------------------------------

namespace {

class MlpModel : public Regressor {
public:
    explicit MlpModel(const ModelConfig& config)
        : window_len_(config.window_len), num_channels_(config.num_channels) {
        config.validate();
        Rng rng(config.seed);
        slope_ = config.leaky_slope;
        std::size_t in_dim = config.window_len * config.num_channels;
        for (std::size_t dim : {std::size_t{64}, std::size_t{32}}) {
            layers_.push_back(LinearLayer::init(in_dim, dim, rng));
            in_dim = dim;
        }
        layers_.push_back(LinearLayer::init(in_dim, 1, rng));
        for (const auto& layer : layers_) {
            auto p = layer.parameters();
            params_.insert(params_.end(), p.begin(), p.end());
        }
    }

    Tensor forward(const Tensor& windows) const override {
        check_windows("MLP", windows, window_len_, num_channels_);
        std::size_t batch = windows.shape()[0];
        Tensor out = reshape(windows, {batch, window_len_ * num_channels_});
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            out = layers_[i].forward(out);
            if (i + 1 < layers_.size()) {
                out = leaky_relu(out, slope_);
            }
        }
        return reshape(out, {batch});
    }

    std::span<Tensor> parameters() override { return params_; }
    std::string name() const override { return "MLP"; }

private:
    std::size_t window_len_;
    std::size_t num_channels_;
    double slope_;
    std::vector<LinearLayer> layers_;
    std::vector<Tensor> params_;
};

class CnnModel : public Regressor {
public:
    explicit CnnModel(const ModelConfig& config)
        : window_len_(config.window_len), num_channels_(config.num_channels) {
        config.validate();
        Rng rng(config.seed);
        slope_ = config.leaky_slope;
        std::size_t padding = (config.conv_kernel_size - 1) / 2;
        conv_ = Conv1dLayer::init(config.num_channels, config.conv_out_channels,
                                  config.conv_kernel_size, padding, rng);
        hidden_ = LinearLayer::init(config.conv_out_channels * config.window_len, 32, rng);
        out_ = LinearLayer::init(32, 1, rng);
        for (const auto& layer : {conv_.parameters(), hidden_.parameters(), out_.parameters()}) {
            params_.insert(params_.end(), layer.begin(), layer.end());
        }
    }

    Tensor forward(const Tensor& windows) const override {
        check_windows("CNN", windows, window_len_, num_channels_);
        std::size_t batch = windows.shape()[0];
        Tensor features = leaky_relu(conv_.forward(swap_last_axes(windows)), slope_);
        Tensor flat = reshape(features, {batch, conv_.out_channels() * window_len_});
        Tensor hidden = leaky_relu(hidden_.forward(flat), slope_);
        return reshape(out_.forward(hidden), {batch});
    }

    std::span<Tensor> parameters() override { return params_; }
    std::string name() const override { return "CNN"; }

private:
    std::size_t window_len_;
    std::size_t num_channels_;
    double slope_;
    Conv1dLayer conv_;
    LinearLayer hidden_;
    LinearLayer out_;
    std::vector<Tensor> params_;
};

class LstmModel : public Regressor {
public:
    explicit LstmModel(const ModelConfig& config)
        : window_len_(config.window_len), num_channels_(config.num_channels) {
        config.validate();
        Rng rng(config.seed);
        lstm1_ = LstmLayer::init(config.num_channels, config.lstm_hidden, rng);
        lstm2_ = LstmLayer::init(config.lstm_hidden, config.lstm_hidden, rng);
        out_ = LinearLayer::init(config.lstm_hidden, 1, rng);
        for (const auto& layer : {lstm1_.parameters(), lstm2_.parameters(), out_.parameters()}) {
            params_.insert(params_.end(), layer.begin(), layer.end());
        }
    }

    Tensor forward(const Tensor& windows) const override {
        check_windows("LSTM", windows, window_len_, num_channels_);
        std::size_t batch = windows.shape()[0];
        LstmLayer::Output first = lstm1_.forward(windows);
        LstmLayer::Output second = lstm2_.forward(first.sequence);
        return reshape(out_.forward(second.hidden), {batch});
    }

    std::span<Tensor> parameters() override { return params_; }
    std::string name() const override { return "LSTM"; }

private:
    std::size_t window_len_;
    std::size_t num_channels_;
    LstmLayer lstm1_;
    LstmLayer lstm2_;
    LinearLayer out_;
    std::vector<Tensor> params_;
};

// Symmetric positive definite solve via Cholesky; used by the MLR fit.
std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) {
                sum -= a[i * n + k] * a[j * n + k];
            }
            if (i == j) {
                if (sum <= 0.0) {
                    throw NumericError("MLR: normal equations are not positive definite");
                }
                a[i * n + j] = std::sqrt(sum);
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    // forward then backward substitution
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) {
            sum -= a[i * n + k] * b[k];
        }
        b[i] = sum / a[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double sum = b[i];
        for (std::size_t k = i + 1; k < n; ++k) {
            sum -= a[k * n + i] * b[k];
        }
        b[i] = sum / a[i * n + i];
    }
    return b;
}

} // namespace

MlrModel::MlrModel(const ModelConfig& config)
    : window_len_(config.window_len), num_channels_(config.num_channels) {
    config.validate();
}

void MlrModel::fit(const WindowedDataset& train) {
    std::size_t features = window_len_ * num_channels_;
    std::size_t dim = features + 1; // intercept last
    std::size_t count = train.size();
    if (count == 0) {
        throw ValueError("MLR: empty training set");
    }
    auto x = train.windows.values();
    auto y = train.targets.values();

    constexpr double kRidge = 1e-8;
    std::vector<double> gram(dim * dim, 0.0);
    std::vector<double> moment(dim, 0.0);
    std::vector<double> row(dim, 1.0);
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t f = 0; f < features; ++f) {
            row[f] = x[s * features + f];
        }
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                gram[i * dim + j] += row[i] * row[j];
            }
            moment[i] += row[i] * y[s];
        }
    }
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = i + 1; j < dim; ++j) {
            gram[i * dim + j] = gram[j * dim + i];
        }
        gram[i * dim + i] += kRidge;
    }
    beta_ = cholesky_solve(std::move(gram), std::move(moment), dim);
}

Tensor MlrModel::forward(const Tensor& windows) const {
    check_windows("MLR", windows, window_len_, num_channels_);
    if (beta_.empty()) {
        throw ValueError("MLR: model has not been fitted");
    }
    std::size_t batch = windows.shape()[0];
    std::size_t features = window_len_ * num_channels_;
    auto x = windows.values();
    std::vector<double> out(batch);
    for (std::size_t s = 0; s < batch; ++s) {
        double acc = beta_[features]; // intercept
        for (std::size_t f = 0; f < features; ++f) {
            acc += beta_[f] * x[s * features + f];
        }
        out[s] = acc;
    }
    return Tensor::from_values({batch}, std::move(out));
}

const char* baseline_name(BaselineKind kind) {
    switch (kind) {
    case BaselineKind::Mlr: return "MLR";
    case BaselineKind::Mlp: return "MLP";
    case BaselineKind::Cnn: return "CNN";
    case BaselineKind::Lstm: return "LSTM";
    }
    return "?";
}

std::optional<BaselineKind> baseline_from_name(const std::string& name) {
    if (name == "MLR" || name == "mlr") return BaselineKind::Mlr;
    if (name == "MLP" || name == "mlp") return BaselineKind::Mlp;
    if (name == "CNN" || name == "cnn") return BaselineKind::Cnn;
    if (name == "LSTM" || name == "lstm") return BaselineKind::Lstm;
    return std::nullopt;
}

std::unique_ptr<Regressor> build_baseline(BaselineKind kind, const ModelConfig& config) {
    switch (kind) {
    case BaselineKind::Mlr: return std::make_unique<MlrModel>(config);
    case BaselineKind::Mlp: return std::make_unique<MlpModel>(config);
    case BaselineKind::Cnn: return std::make_unique<CnnModel>(config);
    case BaselineKind::Lstm: return std::make_unique<LstmModel>(config);
    }
    throw ValueError("build_baseline: unknown kind");
}

std::vector<std::pair<std::string, ModelConfig>> ablation_variants(const ModelConfig& base) {
    auto variant = [&base](bool temporal, bool spatial) {
        ModelConfig c = base;
        c.use_temporal_gat = temporal;
        c.use_spatial_gat = spatial;
        return c;
    };
    return {
        {"STGAT-Fuser", variant(true, true)},
        {"w/o Temporal GATv2", variant(false, true)},
        {"w/o Spatial GATv2", variant(true, false)},
        {"w/o Both GATv2", variant(false, false)},
    };
}

} // namespace stgat
