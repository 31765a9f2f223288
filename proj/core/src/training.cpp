// SPDX-License-Identifier: Apache-2.0
#include "stgat/training.hpp"

#include "stgat/errors.hpp"
#include "stgat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace stgat {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) {
        throw ValueError("TrainConfig: learning_rate must be positive");
    }
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw ValueError("TrainConfig: beta1 and beta2 must lie in [0, 1)");
    }
    if (adam_eps <= 0.0) {
        throw ValueError("TrainConfig: adam_eps must be positive");
    }
    if (batch_size == 0 || max_epochs == 0 || patience == 0) {
        throw ValueError("TrainConfig: batch_size, max_epochs and patience must be positive");
    }
    if (min_delta < 0.0) {
        throw ValueError("TrainConfig: min_delta must be non-negative");
    }
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.rank() != 1 || target.rank() != 1) {
        throw ShapeError("mse_loss: expects rank-1 tensors, got " + shape_str(pred.shape()) +
                         " and " + shape_str(target.shape()));
    }
    if (pred.shape() != target.shape()) {
        throw ShapeError("mse_loss: length mismatch, " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    }
    Tensor diff = sub(pred, target);
    return mean_axis(mul(diff, diff), 0);
}

AdamState AdamState::for_parameters(std::span<Tensor> params) {
    AdamState state;
    state.first_moment.reserve(params.size());
    state.second_moment.reserve(params.size());
    for (const Tensor& p : params) {
        state.first_moment.emplace_back(p.size(), 0.0);
        state.second_moment.emplace_back(p.size(), 0.0);
    }
    return state;
}

void adam_step(std::span<Tensor> params, AdamState& state, const TrainConfig& cfg) {
    if (state.first_moment.size() != params.size()) {
        throw ShapeError("adam_step: state covers " + std::to_string(state.first_moment.size()) +
                         " parameters, model has " + std::to_string(params.size()));
    }
    state.step += 1;
    double t = static_cast<double>(state.step);
    double bias1 = 1.0 - std::pow(cfg.beta1, t);
    double bias2 = 1.0 - std::pow(cfg.beta2, t);

    for (std::size_t p = 0; p < params.size(); ++p) {
        auto values = params[p].mutable_values();
        auto grad = params[p].grad();
        auto& m = state.first_moment[p];
        auto& v = state.second_moment[p];
        if (m.size() != values.size()) {
            throw ShapeError("adam_step: moment size mismatch on parameter " + std::to_string(p));
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            double g = grad.empty() ? 0.0 : grad[i];
            if (!std::isfinite(g)) {
                throw NumericError("adam_step: non-finite gradient on parameter " +
                                   std::to_string(p));
            }
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            double m_hat = m[i] / bias1;
            double v_hat = v[i] / bias2;
            values[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
        }
    }
}

namespace {

// Gathers dataset rows into fresh constant tensors; batch assembly happens
// outside the autodiff graph.
struct Batch {
    Tensor windows;
    Tensor targets;
};

Batch gather_batch(const WindowedDataset& ds, std::span<const std::size_t> indices) {
    std::size_t window = ds.window_len();
    std::size_t channels = ds.num_channels();
    std::size_t row = window * channels;
    auto src = ds.windows.values();
    auto tgt = ds.targets.values();
    std::vector<double> w;
    w.reserve(indices.size() * row);
    std::vector<double> t;
    t.reserve(indices.size());
    for (std::size_t idx : indices) {
        w.insert(w.end(), src.begin() + static_cast<std::ptrdiff_t>(idx * row),
                 src.begin() + static_cast<std::ptrdiff_t>((idx + 1) * row));
        t.push_back(tgt[idx]);
    }
    return Batch{Tensor::from_values({indices.size(), window, channels}, std::move(w)),
                 Tensor::from_values({indices.size()}, std::move(t))};
}

std::vector<std::vector<double>> snapshot(std::span<Tensor> params) {
    std::vector<std::vector<double>> copy;
    copy.reserve(params.size());
    for (const Tensor& p : params) {
        auto v = p.values();
        copy.emplace_back(v.begin(), v.end());
    }
    return copy;
}

void restore(std::span<Tensor> params, const std::vector<std::vector<double>>& copy) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto dst = params[i].mutable_values();
        std::copy(copy[i].begin(), copy[i].end(), dst.begin());
    }
}

} // namespace

std::vector<double> predict_all(const Regressor& model, const WindowedDataset& ds,
                                std::size_t batch_size) {
    std::vector<double> out;
    out.reserve(ds.size());
    std::vector<std::size_t> indices(std::min(batch_size, ds.size()));
    for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
        std::size_t end = std::min(begin + batch_size, ds.size());
        indices.resize(end - begin);
        std::iota(indices.begin(), indices.end(), begin);
        Batch batch = gather_batch(ds, indices);
        Tensor pred = model.forward(batch.windows);
        auto v = pred.values();
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

double evaluate_mse(const Regressor& model, const WindowedDataset& ds, std::size_t batch_size) {
    if (ds.size() == 0) {
        throw ValueError("evaluate_mse: empty dataset");
    }
    std::vector<double> pred = predict_all(model, ds, batch_size);
    auto target = ds.targets.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

TrainResult train(Regressor& model, const WindowedDataset& train_ds, const WindowedDataset& val_ds,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_ds.size() == 0 || val_ds.size() == 0) {
        throw ValueError("train: datasets must be non-empty");
    }
    if (!model.trainable()) {
        throw ValueError("train: " + model.name() + " is fitted in closed form, not trained");
    }

    auto params = model.parameters();
    AdamState adam = AdamState::for_parameters(params);
    Rng rng(cfg.seed);

    TrainResult result;
    result.best_val_mse = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_params = snapshot(params);
    std::vector<std::size_t> order(train_ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_sq_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            std::size_t end = std::min(begin + cfg.batch_size, order.size());
            std::span<const std::size_t> batch_indices(order.data() + begin, end - begin);
            Batch batch = gather_batch(train_ds, batch_indices);

            double batch_loss = 0.0;
            try {
                {
                    Tape tape;
                    Tensor pred = model.forward(batch.windows);
                    Tensor loss = mse_loss(pred, batch.targets);
                    batch_loss = loss.item();
                    tape.backward(loss);
                }
                adam_step(params, adam, cfg);
            } catch (const NumericError& e) {
                throw NumericError("train: epoch " + std::to_string(epoch) + ", batch at index " +
                                   std::to_string(begin) + ": " + e.what());
            }
            epoch_sq_sum += batch_loss * static_cast<double>(end - begin);
            for (Tensor& p : params) {
                p.zero_grad();
            }
        }
        double train_mse = epoch_sq_sum / static_cast<double>(order.size());
        double val_mse = evaluate_mse(model, val_ds, cfg.batch_size);
        result.history.push_back(EpochRecord{epoch, train_mse, val_mse});

        if (val_mse < result.best_val_mse - cfg.min_delta) {
            result.best_val_mse = val_mse;
            result.best_epoch = epoch;
            best_params = snapshot(params);
        }
        if (epoch - result.best_epoch >= cfg.patience) {
            result.stop_epoch = epoch;
            result.stop_reason = "early_stopping";
            break;
        }
    }
    if (result.stop_reason.empty()) {
        result.stop_epoch = result.history.back().epoch;
        result.stop_reason = "max_epochs";
    }
    restore(params, best_params);
    return result;
}

double parameter_gradient_check(Regressor& model, const Tensor& windows, const Tensor& targets,
                                double eps, std::size_t checks_per_tensor) {
    if (eps <= 0.0) {
        throw ValueError("parameter_gradient_check: eps must be positive");
    }
    auto params = model.parameters();
    for (Tensor& p : params) {
        p.zero_grad();
    }
    {
        Tape tape;
        Tensor loss = mse_loss(model.forward(windows), targets);
        tape.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Tensor& p : params) {
        auto g = p.grad();
        if (g.empty()) {
            analytic.emplace_back(p.size(), 0.0);
        } else {
            analytic.emplace_back(g.begin(), g.end());
        }
        p.zero_grad();
    }

    double max_err = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto values = params[pi].mutable_values();
        std::size_t n = values.size();
        std::size_t checks =
            (checks_per_tensor == 0 || checks_per_tensor >= n) ? n : checks_per_tensor;
        std::size_t stride = n / checks;
        for (std::size_t c = 0; c < checks; ++c) {
            std::size_t i = c * stride;
            double original = values[i];
            values[i] = original + eps;
            double plus = mse_loss(model.forward(windows), targets).item();
            values[i] = original - eps;
            double minus = mse_loss(model.forward(windows), targets).item();
            values[i] = original;
            double numeric = (plus - minus) / (2.0 * eps);
            double rel =
                std::abs(analytic[pi][i] - numeric) / std::max(1.0, std::abs(analytic[pi][i]));
            max_err = std::max(max_err, rel);
        }
    }
    return max_err;
}

void write_history_csv(const TrainResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("write_history_csv: cannot open " + path.string());
    }
    out << "epoch,train_mse,val_mse\n";
    char buffer[64];
    for (const EpochRecord& r : result.history) {
        std::snprintf(buffer, sizeof(buffer), "%zu,%.17g,%.17g\n", r.epoch, r.train_mse, r.val_mse);
        out << buffer;
    }
    if (!out) {
        throw IoError("write_history_csv: failed writing " + path.string());
    }
}

} // namespace stgat
