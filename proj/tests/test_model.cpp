// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stgat/errors.hpp"
#include "stgat/model.hpp"
#include "stgat/model_io.hpp"
#include "test_support.hpp"

#include <cstring>
#include <fstream>

using namespace stgat;
using test_support::TempDir;
using test_support::gauss_jordan_solve;
using test_support::random_tensor;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.window_len = 4;
    cfg.num_channels = 7;
    cfg.conv_out_channels = 4;
    cfg.conv_kernel_size = 3;
    cfg.gat_out_dim = 3;
    cfg.lstm_hidden = 5;
    cfg.fc_hidden_dims = {4};
    cfg.seed = 17;
    return cfg;
}

// Closed-form parameter count from the layer shapes alone.
std::size_t analytic_count(const ModelConfig& c) {
    auto conv = c.conv_out_channels * c.num_channels * c.conv_kernel_size + c.conv_out_channels;
    auto gat = [&](std::size_t in_dim) {
        return c.gat_heads *
               (c.gat_out_dim * 2 * in_dim + c.gat_out_dim + c.gat_out_dim * in_dim);
    };
    std::size_t fused = c.conv_out_channels;
    std::size_t total = conv;
    if (c.use_temporal_gat) {
        total += gat(c.conv_out_channels);
        fused += c.gat_out_dim * c.gat_heads;
    }
    if (c.use_spatial_gat) {
        total += gat(c.window_len);
        fused += c.gat_out_dim * c.gat_heads;
    }
    auto lstm = [](std::size_t in, std::size_t hidden) {
        return 4 * hidden * in + 4 * hidden * hidden + 4 * hidden;
    };
    total += lstm(fused, c.lstm_hidden);
    total += 2 * c.lstm_hidden; // layer norm
    total += lstm(c.lstm_hidden, c.lstm_hidden);
    std::size_t in_dim = c.lstm_hidden;
    for (std::size_t dim : c.fc_hidden_dims) {
        total += dim * in_dim + dim;
        in_dim = dim;
    }
    total += in_dim + 1;
    return total;
}

WindowedDataset linear_dataset(std::size_t count, Rng& rng) {
    std::vector<double> windows;
    std::vector<double> targets;
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> w(4 * 7);
        for (double& v : w) {
            v = rng.uniform(0.0, 1.0);
        }
        targets.push_back(2.0 * w[0] + 1.0);
        windows.insert(windows.end(), w.begin(), w.end());
    }
    WindowedDataset ds;
    ds.windows = Tensor::from_values({count, 4, 7}, std::move(windows));
    ds.targets = Tensor::from_values({count}, std::move(targets));
    ds.start_indices.resize(count);
    return ds;
}

} // namespace

TEST_CASE("config validation") {
    ModelConfig cfg;
    cfg.conv_kernel_size = 4;
    CHECK_THROWS_AS(cfg.validate(), ValueError);
    cfg = ModelConfig{};
    cfg.lstm_hidden = 0;
    CHECK_THROWS_AS(cfg.validate(), ValueError);
    CHECK_NOTHROW(ModelConfig{}.validate());
}

TEST_CASE("equal seeds build bit-identical models") {
    ModelConfig cfg = tiny_config();
    FusionModel a(cfg);
    FusionModel b(cfg);
    auto pa = a.parameters();
    auto pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        auto va = pa[i].values();
        auto vb = pb[i].values();
        CHECK(std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) == 0);
    }
    cfg.seed = 18;
    FusionModel c(cfg);
    CHECK(c.parameters()[0].values()[0] != pa[0].values()[0]);
}

TEST_CASE("parameter count matches the closed-form formula") {
    for (bool temporal : {true, false}) {
        for (bool spatial : {true, false}) {
            ModelConfig cfg; // library defaults
            cfg.use_temporal_gat = temporal;
            cfg.use_spatial_gat = spatial;
            FusionModel model(cfg);
            CHECK(model.parameter_count() == analytic_count(cfg));
            CHECK(model.parameters().size() == model.parameter_names().size());
        }
    }
    ModelConfig multi = tiny_config();
    multi.gat_heads = 2;
    FusionModel model(multi);
    CHECK(model.parameter_count() == analytic_count(multi));
}

TEST_CASE("ablation removes parameters monotonically") {
    ModelConfig cfg = tiny_config();
    auto count = [&](bool temporal, bool spatial) {
        ModelConfig c = cfg;
        c.use_temporal_gat = temporal;
        c.use_spatial_gat = spatial;
        return FusionModel(c).parameter_count();
    };
    std::size_t full = count(true, true);
    std::size_t no_temporal = count(false, true);
    std::size_t no_spatial = count(true, false);
    std::size_t neither = count(false, false);
    CHECK(full > no_temporal);
    CHECK(full > no_spatial);
    CHECK(no_temporal > neither);
    CHECK(no_spatial > neither);
}

TEST_CASE("disabling a branch narrows the fused width by gat_out_dim") {
    ModelConfig cfg = tiny_config();
    FusionModel full(cfg);
    cfg.use_spatial_gat = false;
    FusionModel reduced(cfg);
    CHECK(full.lstm1().input_size() - reduced.lstm1().input_size() == cfg.gat_out_dim);
    cfg.use_temporal_gat = false;
    FusionModel bare(cfg);
    CHECK(reduced.lstm1().input_size() - bare.lstm1().input_size() == cfg.gat_out_dim);
    CHECK(bare.lstm1().input_size() == cfg.conv_out_channels);
}

TEST_CASE("forward emits one scalar per window") {
    ModelConfig cfg = tiny_config();
    FusionModel model(cfg);
    Rng rng(1);
    Tensor x = random_tensor({2, 4, 7}, rng, 0.0, 1.0);
    Tensor y = model.forward(x);
    CHECK(y.shape() == Shape{2});
    CHECK_THROWS_AS(model.forward(random_tensor({2, 3, 7}, rng)), ShapeError);
    CHECK_THROWS_AS(model.forward(random_tensor({2, 4, 6}, rng)), ShapeError);
}

TEST_CASE("forward stays finite across random unit-box inputs") {
    ModelConfig cfg = tiny_config();
    FusionModel model(cfg);
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = random_tensor({8, 4, 7}, rng, 0.0, 1.0, 0.0);
        Tensor y = model.forward(x); // every primitive checks for NaN/Inf
        CHECK(y.size() == 8);
    }
}

TEST_CASE("ablated model equals an independently assembled conv-LSTM pipeline") {
    ModelConfig cfg = tiny_config();
    cfg.use_temporal_gat = false;
    cfg.use_spatial_gat = false;
    FusionModel model(cfg);

    // Hand-built stack drawing from the same seeded stream in the same order.
    Rng rng(cfg.seed);
    std::size_t padding = (cfg.conv_kernel_size - 1) / 2;
    Conv1dLayer conv =
        Conv1dLayer::init(cfg.num_channels, cfg.conv_out_channels, cfg.conv_kernel_size, padding, rng);
    LstmLayer lstm1 = LstmLayer::init(cfg.conv_out_channels, cfg.lstm_hidden, rng);
    LayerNormLayer norm = LayerNormLayer::init(cfg.lstm_hidden);
    LstmLayer lstm2 = LstmLayer::init(cfg.lstm_hidden, cfg.lstm_hidden, rng);
    LinearLayer fc1 = LinearLayer::init(cfg.lstm_hidden, cfg.fc_hidden_dims[0], rng);
    LinearLayer fc2 = LinearLayer::init(cfg.fc_hidden_dims[0], 1, rng);

    Rng data_rng(5);
    Tensor x = random_tensor({3, 4, 7}, data_rng, 0.0, 1.0);
    Tensor expected;
    {
        Tensor features = swap_last_axes(conv.forward(swap_last_axes(x)));
        auto h1 = lstm1.forward(features);
        auto h2 = lstm2.forward(norm.forward(h1.sequence));
        Tensor out = fc2.forward(leaky_relu(fc1.forward(h2.hidden), cfg.leaky_slope));
        expected = reshape(out, {3});
    }
    Tensor actual = model.forward(x);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(actual.values()[i] == expected.values()[i]);
    }
}

TEST_CASE("full model gradient check on one batch") {
    ModelConfig cfg = tiny_config();
    FusionModel model(cfg);
    Rng rng(3);
    Tensor x = random_tensor({2, 4, 7}, rng, 0.05, 0.95);
    Tensor target = random_tensor({2}, rng, 0.0, 1.0);
    auto loss = [&](const Tensor& t) {
        Tensor diff = sub(model.forward(t), target);
        return mean_axis(mul(diff, diff), 0);
    };
    CHECK(finite_diff_check(loss, x, 1e-5) < 1e-4);
}

TEST_CASE("ablation variants differ only in the two flags") {
    ModelConfig base = tiny_config();
    auto variants = ablation_variants(base);
    REQUIRE(variants.size() == 4);
    CHECK(variants[0].first == "STGAT-Fuser");
    CHECK(variants[1].first == "w/o Temporal GATv2");
    CHECK(variants[2].first == "w/o Spatial GATv2");
    CHECK(variants[3].first == "w/o Both GATv2");

    CHECK(variants[0].second.use_temporal_gat);
    CHECK(variants[0].second.use_spatial_gat);
    CHECK(!variants[1].second.use_temporal_gat);
    CHECK(variants[1].second.use_spatial_gat);
    CHECK(variants[2].second.use_temporal_gat);
    CHECK(!variants[2].second.use_spatial_gat);
    CHECK(!variants[3].second.use_temporal_gat);
    CHECK(!variants[3].second.use_spatial_gat);

    for (const auto& [name, cfg] : variants) {
        CHECK(cfg.window_len == base.window_len);
        CHECK(cfg.conv_out_channels == base.conv_out_channels);
        CHECK(cfg.gat_out_dim == base.gat_out_dim);
        CHECK(cfg.lstm_hidden == base.lstm_hidden);
        CHECK(cfg.seed == base.seed);
    }
}

TEST_CASE("model file round trip is bit exact") {
    TempDir dir("stgat_model");
    ModelConfig cfg = tiny_config();
    FusionModel model(cfg);

    ScalerParams scaler;
    scaler.channel_min = {0, 1, 2, 3, 4, 5, 6};
    scaler.channel_max = {1, 2, 3, 4, 5, 6, 7};
    scaler.target_min = 10.0;
    scaler.target_max = 90.0;

    auto path = dir.path() / "model.stgf";
    save_model(model, scaler, path);
    LoadedModel loaded = load_model(path);
    REQUIRE(loaded.scaler.has_value());
    CHECK(loaded.scaler->channel_min == scaler.channel_min);
    CHECK(loaded.scaler->target_max == 90.0);
    CHECK(loaded.model->config().lstm_hidden == cfg.lstm_hidden);

    Rng rng(9);
    Tensor x = random_tensor({2, 4, 7}, rng, 0.0, 1.0);
    Tensor before = model.forward(x);
    Tensor after = loaded.model->forward(x);
    CHECK(std::memcmp(before.values().data(), after.values().data(), 2 * sizeof(double)) == 0);

    // saving the loaded model reproduces the file byte for byte
    auto path2 = dir.path() / "model2.stgf";
    save_model(*loaded.model, loaded.scaler, path2);
    std::ifstream f1(path, std::ios::binary);
    std::ifstream f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
}

TEST_CASE("corrupt and truncated model files never load") {
    TempDir dir("stgat_model");
    ModelConfig cfg = tiny_config();
    FusionModel model(cfg);
    auto path = dir.path() / "model.stgf";
    save_model(model, std::nullopt, path);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    auto truncated = dir.path() / "truncated.stgf";
    std::ofstream(truncated, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS_AS(load_model(truncated), FormatError);

    auto flipped = dir.path() / "flipped.stgf";
    std::string mutated = bytes;
    mutated[mutated.size() / 2] = static_cast<char>(mutated[mutated.size() / 2] ^ 0x01);
    std::ofstream(flipped, std::ios::binary) << mutated;
    CHECK_THROWS_AS(load_model(flipped), FormatError);

    auto not_model = dir.path() / "nope.stgf";
    std::ofstream(not_model, std::ios::binary) << "definitely not a model";
    CHECK_THROWS_AS(load_model(not_model), FormatError);
}

TEST_CASE("MLR recovers an exactly linear relation") {
    Rng rng(11);
    WindowedDataset ds = linear_dataset(100, rng);
    MlrModel mlr{ModelConfig{}};
    mlr.fit(ds);
    const auto& beta = mlr.coefficients();
    CHECK(beta[0] == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(beta[28] == doctest::Approx(1.0).epsilon(1e-7));
    Tensor pred = mlr.forward(ds.windows);
    auto t = ds.targets.values();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(std::abs(pred.values()[i] - t[i]) < 1e-8);
    }
}

TEST_CASE("MLR coefficients match an independent normal-equation solve") {
    Rng rng(12);
    std::size_t count = 60;
    std::vector<double> windows;
    std::vector<double> targets;
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> w(28);
        for (double& v : w) {
            v = rng.uniform(-1.0, 1.0);
        }
        double y = 0.3;
        for (std::size_t f = 0; f < 28; ++f) {
            y += (0.01 * static_cast<double>(f) - 0.1) * w[f];
        }
        y += 0.05 * w[3] * w[7]; // a touch of nonlinearity so residuals are not zero
        targets.push_back(y);
        windows.insert(windows.end(), w.begin(), w.end());
    }
    WindowedDataset ds;
    ds.windows = Tensor::from_values({count, 4, 7}, std::move(windows));
    ds.targets = Tensor::from_values({count}, std::move(targets));
    ds.start_indices.resize(count);

    MlrModel mlr{ModelConfig{}};
    mlr.fit(ds);

    // independent route: build the normal equations and solve by Gauss-Jordan
    std::size_t dim = 29;
    std::vector<double> gram(dim * dim, 0.0);
    std::vector<double> moment(dim, 0.0);
    auto x = ds.windows.values();
    auto y = ds.targets.values();
    for (std::size_t s = 0; s < count; ++s) {
        std::vector<double> row(dim, 1.0);
        for (std::size_t f = 0; f < 28; ++f) {
            row[f] = x[s * 28 + f];
        }
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = 0; j < dim; ++j) {
                gram[i * dim + j] += row[i] * row[j];
            }
            moment[i] += row[i] * y[s];
        }
    }
    for (std::size_t i = 0; i < dim; ++i) {
        gram[i * dim + i] += 1e-8;
    }
    std::vector<double> expected = gauss_jordan_solve(gram, moment, dim);
    for (std::size_t i = 0; i < dim; ++i) {
        CHECK(std::abs(mlr.coefficients()[i] - expected[i]) < 1e-6);
    }
}

TEST_CASE("every baseline emits batch-shaped predictions") {
    ModelConfig cfg = tiny_config();
    Rng rng(13);
    Tensor x = random_tensor({5, 4, 7}, rng, 0.0, 1.0);
    for (BaselineKind kind : {BaselineKind::Mlp, BaselineKind::Cnn, BaselineKind::Lstm}) {
        auto model = build_baseline(kind, cfg);
        CHECK(model->trainable());
        CHECK(model->forward(x).shape() == Shape{5});
        CHECK(model->parameter_count() > 0);
        CHECK(model->name() == baseline_name(kind));
    }
    auto mlr = build_baseline(BaselineKind::Mlr, cfg);
    CHECK(!mlr->trainable());
    Rng rng2(14);
    mlr->fit(linear_dataset(50, rng2));
    CHECK(mlr->forward(x).shape() == Shape{5});
}

TEST_CASE("baseline names round trip") {
    CHECK(baseline_from_name("MLR") == BaselineKind::Mlr);
    CHECK(baseline_from_name("lstm") == BaselineKind::Lstm);
    CHECK(!baseline_from_name("SVR").has_value());
}
