// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stgat/rng.hpp"
#include "stgat/tensor.hpp"

#include <vector>

namespace stgat {

inline constexpr double kDefaultLeakySlope = 0.2;

/// Weights draw from uniform(-sqrt(1/fan_in), sqrt(1/fan_in)).
Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng);

// 1-D convolution (cross-correlation plus bias) over the last axis.
struct Conv1dLayer {
    Tensor kernel;          // [out_channels x in_channels x kernel_size]
    Tensor bias;            // [out_channels]
    std::size_t padding = 0;

    static Conv1dLayer init(std::size_t in_channels, std::size_t out_channels,
                            std::size_t kernel_size, std::size_t padding, Rng& rng);

    /// [batch x in_channels x len] -> [batch x out_channels x out_len] where
    /// out_len = len + 2*padding - kernel_size + 1.
    Tensor forward(const Tensor& x) const;

    std::size_t out_channels() const { return kernel.shape()[0]; }
    std::size_t in_channels() const { return kernel.shape()[1]; }
    std::size_t kernel_size() const { return kernel.shape()[2]; }
    std::vector<Tensor> parameters() const { return {kernel, bias}; }
};

// Single LSTM layer. The stacked gate blocks are ordered
// (input, forget, cell, output); the forget-gate bias starts at 1.
struct LstmLayer {
    Tensor weight_input;   // [4*hidden x input]
    Tensor weight_hidden;  // [4*hidden x hidden]
    Tensor bias;           // [4*hidden]

    static LstmLayer init(std::size_t input_size, std::size_t hidden_size, Rng& rng);

    struct Output {
        Tensor sequence; // [batch x time x hidden], hidden state at every step
        Tensor hidden;   // [batch x hidden], last step
        Tensor cell;     // [batch x hidden], last step
    };

    Output forward(const Tensor& x) const;
    Output forward(const Tensor& x, const Tensor& h0, const Tensor& c0) const;

    std::size_t hidden_size() const { return weight_hidden.shape()[1]; }
    std::size_t input_size() const { return weight_input.shape()[1]; }
    std::vector<Tensor> parameters() const { return {weight_input, weight_hidden, bias}; }
};

// Layer normalization over the last axis.
struct LayerNormLayer {
    Tensor gain;    // [features]
    Tensor offset;  // [features]
    double epsilon = 1e-5;

    static LayerNormLayer init(std::size_t features, double epsilon = 1e-5);

    Tensor forward(const Tensor& x) const;

    std::size_t features() const { return gain.shape()[0]; }
    std::vector<Tensor> parameters() const { return {gain, offset}; }
};

struct LinearLayer {
    Tensor weight;  // [out x in]
    Tensor bias;    // [out]

    static LinearLayer init(std::size_t in_features, std::size_t out_features, Rng& rng);

    /// y = x W^T + b. Accepts [batch x in] or a plain [in] vector.
    Tensor forward(const Tensor& x) const;

    std::size_t in_features() const { return weight.shape()[1]; }
    std::size_t out_features() const { return weight.shape()[0]; }
    std::vector<Tensor> parameters() const { return {weight, bias}; }
};

} // namespace stgat
