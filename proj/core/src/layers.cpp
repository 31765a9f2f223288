// SPDX-License-Identifier: Apache-2.0
#include "stgat/layers.hpp"

#include "stgat/errors.hpp"

#include <cmath>

namespace stgat {

Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) {
        throw ValueError("init_weight: fan_in must be positive");
    }
    double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::size_t n = shape_size(shape);
    std::vector<double> values(n);
    for (double& v : values) {
        v = rng.uniform(-bound, bound);
    }
    return Tensor::from_values(std::move(shape), std::move(values), true);
}

// --- Conv1d ------------------------------------------------------------------

Conv1dLayer Conv1dLayer::init(std::size_t in_channels, std::size_t out_channels,
                              std::size_t kernel_size, std::size_t padding, Rng& rng) {
    if (kernel_size == 0) {
        throw ValueError("Conv1dLayer: kernel_size must be at least 1");
    }
    Conv1dLayer layer;
    layer.kernel =
        init_weight({out_channels, in_channels, kernel_size}, in_channels * kernel_size, rng);
    layer.bias = Tensor::zeros({out_channels}, true);
    layer.padding = padding;
    return layer;
}

Tensor Conv1dLayer::forward(const Tensor& x) const {
    if (x.rank() != 3) {
        throw ShapeError("conv1d: expects [batch x channels x len], got " + shape_str(x.shape()));
    }
    const Shape& s = x.shape();
    std::size_t batch = s[0];
    std::size_t k = kernel_size();
    if (s[1] != in_channels()) {
        throw ShapeError("conv1d: input has " + std::to_string(s[1]) + " channels, kernel expects " +
                         std::to_string(in_channels()));
    }
    std::size_t padded_len = s[2] + 2 * padding;
    if (padded_len < k) {
        throw ShapeError("conv1d: input length " + std::to_string(s[2]) +
                         " too short for kernel size " + std::to_string(k));
    }
    std::size_t out_len = padded_len - k + 1;

    Tensor padded = x;
    if (padding > 0) {
        Tensor zeros = Tensor::zeros({batch, s[1], padding});
        padded = concat({zeros, x, zeros}, 2);
    }

    // im2col per output position, then one matmul per position.
    Tensor flat_kernel = reshape(kernel, {out_channels(), in_channels() * k});
    Tensor bias_col = reshape(bias, {out_channels(), 1});
    std::vector<Tensor> positions;
    positions.reserve(out_len);
    for (std::size_t t = 0; t < out_len; ++t) {
        Tensor window = reshape(slice(padded, 2, t, t + k), {batch, in_channels() * k});
        positions.push_back(reshape(matmul_t(window, flat_kernel), {batch, out_channels(), 1}));
    }
    Tensor stacked = out_len == 1 ? positions[0] : concat(positions, 2);
    return add(stacked, bias_col);
}

// --- LSTM --------------------------------------------------------------------

LstmLayer LstmLayer::init(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
    if (hidden_size == 0 || input_size == 0) {
        throw ValueError("LstmLayer: sizes must be positive");
    }
    LstmLayer layer;
    layer.weight_input = init_weight({4 * hidden_size, input_size}, input_size, rng);
    layer.weight_hidden = init_weight({4 * hidden_size, hidden_size}, hidden_size, rng);
    std::vector<double> bias_values(4 * hidden_size, 0.0);
    for (std::size_t i = hidden_size; i < 2 * hidden_size; ++i) {
        bias_values[i] = 1.0; // forget gate
    }
    layer.bias = Tensor::from_values({4 * hidden_size}, std::move(bias_values), true);
    return layer;
}

LstmLayer::Output LstmLayer::forward(const Tensor& x) const {
    if (x.rank() != 3) {
        throw ShapeError("lstm: expects [batch x time x features], got " + shape_str(x.shape()));
    }
    std::size_t batch = x.shape()[0];
    Tensor h0 = Tensor::zeros({batch, hidden_size()});
    Tensor c0 = Tensor::zeros({batch, hidden_size()});
    return forward(x, h0, c0);
}

LstmLayer::Output LstmLayer::forward(const Tensor& x, const Tensor& h0, const Tensor& c0) const {
    if (x.rank() != 3) {
        throw ShapeError("lstm: expects [batch x time x features], got " + shape_str(x.shape()));
    }
    const Shape& s = x.shape();
    std::size_t batch = s[0];
    std::size_t time = s[1];
    std::size_t hidden = hidden_size();
    if (s[2] != input_size()) {
        throw ShapeError("lstm: feature dim " + std::to_string(s[2]) + " does not match input size " +
                         std::to_string(input_size()));
    }
    Shape state_shape{batch, hidden};
    if (h0.shape() != state_shape || c0.shape() != state_shape) {
        throw ShapeError("lstm: state shapes must be " + shape_str(state_shape) + ", got " +
                         shape_str(h0.shape()) + " and " + shape_str(c0.shape()));
    }

    Tensor h = h0;
    Tensor c = c0;
    std::vector<Tensor> steps;
    steps.reserve(time);
    for (std::size_t t = 0; t < time; ++t) {
        Tensor xt = reshape(slice(x, 1, t, t + 1), {batch, s[2]});
        Tensor gates = add(add(matmul_t(xt, weight_input), matmul_t(h, weight_hidden)), bias);
        Tensor in_gate = sigmoid(slice(gates, 1, 0, hidden));
        Tensor forget_gate = sigmoid(slice(gates, 1, hidden, 2 * hidden));
        Tensor candidate = tanh(slice(gates, 1, 2 * hidden, 3 * hidden));
        Tensor out_gate = sigmoid(slice(gates, 1, 3 * hidden, 4 * hidden));
        c = add(mul(forget_gate, c), mul(in_gate, candidate));
        h = mul(out_gate, tanh(c));
        steps.push_back(reshape(h, {batch, 1, hidden}));
    }
    Tensor sequence = time == 1 ? steps[0] : concat(steps, 1);
    return Output{sequence, h, c};
}

// --- LayerNorm ---------------------------------------------------------------

LayerNormLayer LayerNormLayer::init(std::size_t features, double epsilon) {
    if (features == 0) {
        throw ValueError("LayerNormLayer: features must be positive");
    }
    if (epsilon <= 0.0) {
        throw ValueError("LayerNormLayer: epsilon must be positive");
    }
    LayerNormLayer layer;
    layer.gain = Tensor::full({features}, 1.0, true);
    layer.offset = Tensor::zeros({features}, true);
    layer.epsilon = epsilon;
    return layer;
}

Tensor LayerNormLayer::forward(const Tensor& x) const {
    if (x.rank() == 0 || x.shape().back() != features()) {
        throw ShapeError("layer_norm: last dimension of " + shape_str(x.shape()) +
                         " does not match feature count " + std::to_string(features()));
    }
    std::size_t axis = x.rank() - 1;
    Shape keep = x.shape();
    keep[axis] = 1;

    Tensor mean = reshape(mean_axis(x, axis), keep);
    Tensor centered = sub(x, mean);
    Tensor variance = reshape(mean_axis(mul(centered, centered), axis), keep);
    Tensor denom = sqrt(add(variance, Tensor::scalar(epsilon)));
    Tensor normalized = div(centered, denom);
    return add(mul(normalized, gain), offset);
}

// --- Linear ------------------------------------------------------------------

LinearLayer LinearLayer::init(std::size_t in_features, std::size_t out_features, Rng& rng) {
    if (in_features == 0 || out_features == 0) {
        throw ValueError("LinearLayer: sizes must be positive");
    }
    LinearLayer layer;
    layer.weight = init_weight({out_features, in_features}, in_features, rng);
    layer.bias = Tensor::zeros({out_features}, true);
    return layer;
}

Tensor LinearLayer::forward(const Tensor& x) const {
    bool vector_input = x.rank() == 1;
    Tensor input = vector_input ? reshape(x, {1, x.shape()[0]}) : x;
    if (input.rank() != 2 || input.shape()[1] != in_features()) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
    }
    Tensor out = add(matmul_t(input, weight), bias);
    return vector_input ? reshape(out, {out_features()}) : out;
}

} // namespace stgat
