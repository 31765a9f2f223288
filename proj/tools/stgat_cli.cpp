// SPDX-License-Identifier: Apache-2.0
//
// Command line front end for the sensor-fusion calibration harness.
//
// Subcommands:
//   synth      generate a synthetic sensor-node corpus (CSV)
//   train      train a fusion model on a corpus and persist the artifacts
//   evaluate   evaluate a saved model on a corpus's test split
//   ablate     run the four-variant ablation protocol over seeded runs
//   baseline   compare baselines and the fusion model on one corpus
//   gradcheck  verify analytic gradients against central finite differences
//
// Exit codes: 0 success, 1 validation error, 2 runtime or numeric error.

#include "stgat/checksum.hpp"
#include "stgat/data.hpp"
#include "stgat/errors.hpp"
#include "stgat/eval.hpp"
#include "stgat/model.hpp"
#include "stgat/model_io.hpp"
#include "stgat/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace stgat;
using nlohmann::json;

namespace {

// --- effective configuration ---------------------------------------------------

struct FlatConfig {
    ModelConfig model;
    TrainConfig train;
};

const std::vector<std::string> kModelKeys{
    "window_len",      "num_channels", "conv_out_channels", "conv_kernel_size",
    "gat_out_dim",     "gat_heads",    "lstm_hidden",       "fc_hidden_dims",
    "use_temporal_gat", "use_spatial_gat", "leaky_slope",   "seed"};
const std::vector<std::string> kTrainKeys{
    "learning_rate", "beta1", "beta2", "adam_eps", "batch_size", "max_epochs", "patience",
    "min_delta"};

json flat_config_json(const FlatConfig& cfg) {
    return json{{"window_len", cfg.model.window_len},
                {"num_channels", cfg.model.num_channels},
                {"conv_out_channels", cfg.model.conv_out_channels},
                {"conv_kernel_size", cfg.model.conv_kernel_size},
                {"gat_out_dim", cfg.model.gat_out_dim},
                {"gat_heads", cfg.model.gat_heads},
                {"lstm_hidden", cfg.model.lstm_hidden},
                {"fc_hidden_dims", cfg.model.fc_hidden_dims},
                {"use_temporal_gat", cfg.model.use_temporal_gat},
                {"use_spatial_gat", cfg.model.use_spatial_gat},
                {"leaky_slope", cfg.model.leaky_slope},
                {"seed", cfg.model.seed},
                {"learning_rate", cfg.train.learning_rate},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"adam_eps", cfg.train.adam_eps},
                {"batch_size", cfg.train.batch_size},
                {"max_epochs", cfg.train.max_epochs},
                {"patience", cfg.train.patience},
                {"min_delta", cfg.train.min_delta}};
}

// Flat JSON object with the documented key set; unknown keys are an error.
FlatConfig load_flat_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("config: cannot open " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValueError("config: " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) {
        throw ValueError("config: expected a flat JSON object");
    }
    FlatConfig cfg;
    try {
        for (auto& [key, value] : j.items()) {
            if (key == "window_len") cfg.model.window_len = value.get<std::size_t>();
            else if (key == "num_channels") cfg.model.num_channels = value.get<std::size_t>();
            else if (key == "conv_out_channels") cfg.model.conv_out_channels = value.get<std::size_t>();
            else if (key == "conv_kernel_size") cfg.model.conv_kernel_size = value.get<std::size_t>();
            else if (key == "gat_out_dim") cfg.model.gat_out_dim = value.get<std::size_t>();
            else if (key == "gat_heads") cfg.model.gat_heads = value.get<std::size_t>();
            else if (key == "lstm_hidden") cfg.model.lstm_hidden = value.get<std::size_t>();
            else if (key == "fc_hidden_dims") cfg.model.fc_hidden_dims = value.get<std::vector<std::size_t>>();
            else if (key == "use_temporal_gat") cfg.model.use_temporal_gat = value.get<bool>();
            else if (key == "use_spatial_gat") cfg.model.use_spatial_gat = value.get<bool>();
            else if (key == "leaky_slope") cfg.model.leaky_slope = value.get<double>();
            else if (key == "seed") cfg.model.seed = value.get<std::uint64_t>();
            else if (key == "learning_rate") cfg.train.learning_rate = value.get<double>();
            else if (key == "beta1") cfg.train.beta1 = value.get<double>();
            else if (key == "beta2") cfg.train.beta2 = value.get<double>();
            else if (key == "adam_eps") cfg.train.adam_eps = value.get<double>();
            else if (key == "batch_size") cfg.train.batch_size = value.get<std::size_t>();
            else if (key == "max_epochs") cfg.train.max_epochs = value.get<std::size_t>();
            else if (key == "patience") cfg.train.patience = value.get<std::size_t>();
            else if (key == "min_delta") cfg.train.min_delta = value.get<double>();
            else throw ValueError("config: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ValueError("config: bad value type: " + std::string(e.what()));
    }
    cfg.train.seed = cfg.model.seed;
    return cfg;
}

// --- manifests ------------------------------------------------------------------

std::string now_utc() {
    return format_timestamp_utc(static_cast<std::int64_t>(std::time(nullptr)));
}

json corpus_stamp(const std::filesystem::path& path) {
    return json{{"path", std::filesystem::absolute(path).string()},
                {"crc32", crc32_hex(crc32_file(path))},
                {"bytes", std::filesystem::file_size(path)}};
}

// Manifests list absolute paths so they stay resolvable from anywhere.
std::string artifact_path(const std::filesystem::path& path) {
    return std::filesystem::absolute(path).string();
}

void write_json_atomic(const json& j, const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out << j.dump(2) << '\n';
        if (!out) {
            throw IoError("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::string config_hash(const json& config) {
    std::string text = config.dump();
    return crc32_hex(crc32(std::span<const unsigned char>(
        reinterpret_cast<const unsigned char*>(text.data()), text.size())));
}

std::filesystem::path resolve_run_dir(const std::string& out_flag, const json& config) {
    if (!out_flag.empty()) {
        return out_flag;
    }
    const char* root_env = std::getenv("STGAT_ARTIFACTS");
    std::filesystem::path root = root_env != nullptr ? root_env : "runs";
    std::string stamp = now_utc();
    for (char& c : stamp) {
        if (c == ':') {
            c = '-';
        }
    }
    std::filesystem::path dir = root / (stamp + "-" + config_hash(config));
    for (int counter = 1; std::filesystem::exists(dir); ++counter) {
        dir = root / (stamp + "-" + config_hash(config) + "-" + std::to_string(counter));
    }
    return dir;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::string field;
    std::istringstream in(text);
    while (std::getline(in, field, ',')) {
        try {
            seeds.push_back(std::stoull(field));
        } catch (const std::exception&) {
            throw ValueError("seeds: cannot parse '" + field + "'");
        }
    }
    if (seeds.empty()) {
        throw ValueError("seeds: empty list");
    }
    return seeds;
}

json metrics_json(const RunMetrics& m) {
    return json{{"seed", m.seed},
                {"rmse", m.rmse},
                {"mae", m.mae},
                {"scaled_test_mse", m.scaled_test_mse},
                {"best_val_mse", m.best_val_mse},
                {"best_epoch", m.best_epoch},
                {"stop_epoch", m.stop_epoch},
                {"stop_reason", m.stop_reason}};
}

void print_metrics(const RunMetrics& m) {
    std::printf("scaled test MSE:  %.17g\n", m.scaled_test_mse);
    std::printf("test RMSE (ug/m3): %.17g\n", m.rmse);
    std::printf("test MAE  (ug/m3): %.17g\n", m.mae);
}

RunMetrics test_metrics(const Regressor& model, const WindowedDataset& test,
                        const ScalerParams& scaler, std::size_t batch_size) {
    std::vector<double> pred = predict_all(model, test, batch_size);
    auto scaled_target = test.targets.values();
    double scaled_mse = 0.0;
    std::vector<double> pred_phys(pred.size()), target_phys(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - scaled_target[i];
        scaled_mse += d * d;
        pred_phys[i] = unscale_target(pred[i], scaler);
        target_phys[i] = unscale_target(scaled_target[i], scaler);
    }
    RunMetrics m;
    m.scaled_test_mse = scaled_mse / static_cast<double>(pred.size());
    m.rmse = rmse(pred_phys, target_phys);
    m.mae = mae(pred_phys, target_phys);
    return m;
}

// --- subcommands ------------------------------------------------------------------

struct SynthOptions {
    std::string out;
    std::size_t length = 2000;
    std::uint64_t seed = 1;
};

int cmd_synth(const SynthOptions& opt) {
    std::string started = now_utc();
    SynthParams params;
    params.length = opt.length;
    RawSeries series = synthesize(params, opt.seed); // validates before any write
    std::filesystem::path out = opt.out;
    if (out.has_parent_path()) {
        std::filesystem::create_directories(out.parent_path());
    }
    write_csv(series, out);

    json manifest{{"command", "synth"},
                  {"length", opt.length},
                  {"seed", opt.seed},
                  {"started_at", started},
                  {"finished_at", now_utc()},
                  {"corpus", corpus_stamp(out)},
                  {"artifacts", json::array({artifact_path(out)})}};
    write_json_atomic(manifest, out.string() + ".manifest.json");
    std::printf("wrote %zu rows to %s (crc32 %s)\n", series.length(), out.string().c_str(),
                crc32_hex(crc32_file(out)).c_str());
    return 0;
}

struct TrainOptions {
    std::string data;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> max_epochs;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> patience;
    std::optional<double> learning_rate;
};

FlatConfig effective_config(const TrainOptions& opt) {
    FlatConfig cfg;
    if (!opt.config.empty()) {
        cfg = load_flat_config(opt.config);
    }
    if (opt.seed) {
        cfg.model.seed = *opt.seed;
        cfg.train.seed = *opt.seed;
    }
    if (opt.max_epochs) cfg.train.max_epochs = *opt.max_epochs;
    if (opt.batch_size) cfg.train.batch_size = *opt.batch_size;
    if (opt.patience) cfg.train.patience = *opt.patience;
    if (opt.learning_rate) cfg.train.learning_rate = *opt.learning_rate;
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

int cmd_train(const TrainOptions& opt) {
    std::string started = now_utc();
    FlatConfig cfg = effective_config(opt);
    json cfg_json = flat_config_json(cfg);
    std::filesystem::path dir = resolve_run_dir(opt.out, cfg_json);
    std::filesystem::create_directories(dir);

    RawSeries corpus = load_csv(opt.data);
    if (corpus.num_channels() != cfg.model.num_channels) {
        throw ValueError("train: corpus has " + std::to_string(corpus.num_channels()) +
                         " channels, config expects " + std::to_string(cfg.model.num_channels));
    }
    PreparedData data = prepare(corpus, cfg.model.window_len);
    if (corpus.dropped_rows > 0) {
        std::printf("dropped %zu rows with missing values\n", corpus.dropped_rows);
    }

    FusionModel model(cfg.model);
    TrainResult result = train(model, data.train, data.val, cfg.train);

    RunMetrics metrics = test_metrics(model, data.test, data.scaler, cfg.train.batch_size);
    metrics.seed = cfg.model.seed;
    metrics.best_val_mse = result.best_val_mse;
    metrics.best_epoch = result.best_epoch;
    metrics.stop_epoch = result.stop_epoch;
    metrics.stop_reason = result.stop_reason;

    auto model_path = dir / "model.stgf";
    auto history_path = dir / "history.csv";
    auto metrics_path = dir / "metrics.json";
    save_model(model, data.scaler, model_path);
    write_history_csv(result, history_path);
    write_json_atomic(metrics_json(metrics), metrics_path);

    json manifest{{"command", "train"},
                  {"started_at", started},
                  {"finished_at", now_utc()},
                  {"corpus", corpus_stamp(opt.data)},
                  {"config", cfg_json},
                  {"seeds", json::array({cfg.model.seed})},
                  {"stop_reason", result.stop_reason},
                  {"best_epoch", result.best_epoch},
                  {"stop_epoch", result.stop_epoch},
                  {"artifacts", json::array({artifact_path(model_path), artifact_path(history_path),
                                             artifact_path(metrics_path)})}};
    write_json_atomic(manifest, dir / "manifest.json");

    std::printf("trained %zu epochs (%s), best epoch %zu, best val MSE %.17g\n",
                result.history.size(), result.stop_reason.c_str(), result.best_epoch,
                result.best_val_mse);
    print_metrics(metrics);
    std::printf("artifacts in %s\n", dir.string().c_str());
    return 0;
}

struct EvaluateOptions {
    std::string data;
    std::string model;
    std::string out;
};

int cmd_evaluate(const EvaluateOptions& opt) {
    LoadedModel loaded = load_model(opt.model);
    if (!loaded.scaler) {
        throw ValueError("evaluate: model file carries no scaler parameters");
    }
    const ModelConfig& cfg = loaded.model->config();

    RawSeries corpus = load_csv(opt.data);
    if (corpus.num_channels() != cfg.num_channels ||
        loaded.scaler->channel_min.size() != corpus.num_channels()) {
        throw ValueError("evaluate: model expects " + std::to_string(cfg.num_channels) +
                         " channels, corpus has " + std::to_string(corpus.num_channels()));
    }
    SplitSeries splits = chrono_split(corpus, {}, cfg.window_len);
    WindowedDataset test =
        make_windows(apply_scaler(splits.test, *loaded.scaler), cfg.window_len);

    RunMetrics metrics = test_metrics(*loaded.model, test, *loaded.scaler, 32);
    metrics.seed = cfg.seed;
    metrics.stop_reason = "evaluate";
    print_metrics(metrics);

    if (!opt.out.empty()) {
        std::filesystem::path out = opt.out;
        if (out.has_parent_path()) {
            std::filesystem::create_directories(out.parent_path());
        }
        write_json_atomic(metrics_json(metrics), out);
    }
    return 0;
}

struct ReportOptions {
    std::string data;
    std::string config;
    std::string out;
    std::string seeds = "1,2,3,4,5";
    std::string kind = "all"; // baseline only
};

FlatConfig report_config(const ReportOptions& opt) {
    FlatConfig cfg;
    if (!opt.config.empty()) {
        cfg = load_flat_config(opt.config);
    }
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

int write_report(const EvalReport& report, const FlatConfig& cfg, const ReportOptions& opt,
                 const char* command, const std::string& started,
                 const std::filesystem::path& dir) {
    auto csv_path = dir / "report.csv";
    auto table_path = dir / "report.txt";
    {
        std::ofstream csv(csv_path);
        csv << report.to_csv();
        std::ofstream table(table_path);
        table << report.to_table();
    }
    json stop_reasons = json::object();
    for (const ReportRow& row : report.rows) {
        json reasons = json::array();
        for (const RunMetrics& m : row.runs) {
            reasons.push_back(m.stop_reason);
        }
        stop_reasons[row.method] = reasons;
    }
    json manifest{{"command", command},
                  {"started_at", started},
                  {"finished_at", now_utc()},
                  {"corpus", corpus_stamp(opt.data)},
                  {"config", flat_config_json(cfg)},
                  {"seeds", parse_seeds(opt.seeds)},
                  {"stop_reasons", stop_reasons},
                  {"runs_root", artifact_path(dir / "runs")},
                  {"run_layout", "<method-slug>/seed_<seed>/metrics.json"},
                  {"artifacts", json::array({artifact_path(csv_path), artifact_path(table_path)})}};
    write_json_atomic(manifest, dir / "manifest.json");

    std::fputs(report.to_table().c_str(), stdout);
    std::printf("report in %s\n", dir.string().c_str());
    return 0;
}

int cmd_ablate(const ReportOptions& opt) {
    std::string started = now_utc();
    FlatConfig cfg = report_config(opt);
    std::vector<std::uint64_t> seeds = parse_seeds(opt.seeds);
    json cfg_json = flat_config_json(cfg);
    std::filesystem::path dir = resolve_run_dir(opt.out, cfg_json);
    std::filesystem::create_directories(dir);

    RawSeries corpus = load_csv(opt.data);
    PreparedData data = prepare(corpus, cfg.model.window_len);
    EvalReport report = run_ablation(data, cfg.model, cfg.train, seeds, dir / "runs");
    return write_report(report, cfg, opt, "ablate", started, dir);
}

int cmd_baseline(const ReportOptions& opt) {
    std::string started = now_utc();
    FlatConfig cfg = report_config(opt);
    std::vector<std::uint64_t> seeds = parse_seeds(opt.seeds);

    std::vector<std::string> kinds;
    if (opt.kind == "all") {
        kinds = {"MLR", "MLP", "CNN", "LSTM", "STGAT"};
    } else {
        kinds = {opt.kind};
    }
    for (const std::string& kind : kinds) {
        if (kind != "STGAT" && !baseline_from_name(kind).has_value()) {
            throw ValueError("baseline: unknown kind '" + kind +
                             "' (valid: MLR, MLP, CNN, LSTM, STGAT, all)");
        }
    }

    json cfg_json = flat_config_json(cfg);
    std::filesystem::path dir = resolve_run_dir(opt.out, cfg_json);
    std::filesystem::create_directories(dir);

    RawSeries corpus = load_csv(opt.data);
    PreparedData data = prepare(corpus, cfg.model.window_len);

    EvalReport report;
    for (const std::string& kind : kinds) {
        RegressorBuilder builder;
        std::string label;
        if (kind == "STGAT") {
            label = "STGAT-Fuser";
            ModelConfig base = cfg.model;
            builder = [base](std::uint64_t seed) -> std::unique_ptr<Regressor> {
                ModelConfig seeded = base;
                seeded.seed = seed;
                return std::make_unique<FusionModel>(seeded);
            };
        } else {
            BaselineKind bk = *baseline_from_name(kind);
            label = baseline_name(bk);
            ModelConfig base = cfg.model;
            builder = [bk, base](std::uint64_t seed) -> std::unique_ptr<Regressor> {
                ModelConfig seeded = base;
                seeded.seed = seed;
                return build_baseline(bk, seeded);
            };
        }
        report.rows.push_back(multi_run(builder, data, cfg.train, seeds, dir / "runs", label));
    }
    return write_report(report, cfg, opt, "baseline", started, dir);
}

// --- gradcheck ---------------------------------------------------------------------

struct GradcheckOptions {
    std::string config;
    std::uint64_t seed = 1;
    std::string inject_fault;
};

int cmd_gradcheck(const GradcheckOptions& opt) {
    FlatConfig cfg;
    if (!opt.config.empty()) {
        cfg = load_flat_config(opt.config);
    }
    cfg.model.validate();
    Rng rng(opt.seed);
    constexpr double kTolerance = 1e-4;
    constexpr double kEps = 1e-5;

    auto sample = [&rng](Shape shape, double lo = -1.5, double hi = 1.5) {
        std::size_t n = shape_size(shape);
        std::vector<double> values(n);
        for (double& v : values) {
            do {
                v = rng.uniform(lo, hi);
            } while (std::abs(v) < 1e-2);
        }
        return Tensor::from_values(std::move(shape), std::move(values));
    };

    struct Check {
        std::string name;
        double err;
    };
    std::vector<Check> checks;

    { // conv1d
        Conv1dLayer layer = Conv1dLayer::init(2, 3, 3, 1, rng);
        Tensor x = sample({2, 2, 5});
        checks.push_back({"conv1d", finite_diff_check(
                                        [&](const Tensor& t) {
                                            return mean_axis(reshape(layer.forward(t), {2 * 3 * 5}), 0);
                                        },
                                        x, kEps)});
    }
    { // linear
        LinearLayer layer = LinearLayer::init(4, 3, rng);
        Tensor x = sample({3, 4});
        checks.push_back({"linear", finite_diff_check(
                                        [&](const Tensor& t) {
                                            return mean_axis(reshape(layer.forward(t), {9}), 0);
                                        },
                                        x, kEps)});
    }
    { // layer_norm
        LayerNormLayer layer = LayerNormLayer::init(6);
        Tensor x = sample({3, 6});
        checks.push_back({"layer_norm", finite_diff_check(
                                            [&](const Tensor& t) {
                                                return mean_axis(reshape(layer.forward(t), {18}), 0);
                                            },
                                            x, kEps)});
    }
    { // lstm
        LstmLayer layer = LstmLayer::init(3, 4, rng);
        Tensor x = sample({2, 3, 3});
        checks.push_back({"lstm", finite_diff_check(
                                      [&](const Tensor& t) {
                                          auto out = layer.forward(t);
                                          return mean_axis(reshape(out.sequence, {2 * 3 * 4}), 0);
                                      },
                                      x, kEps)});
    }
    { // gatv2: scores -> softmax -> aggregate
        Gatv2Layer layer = Gatv2Layer::init(3, 4, 3, cfg.model.leaky_slope, rng);
        Graph graph = Graph::complete(4, true);
        Tensor x = sample({4, 3});
        checks.push_back({"gatv2", finite_diff_check(
                                       [&](const Tensor& t) {
                                           return mean_axis(reshape(layer.forward(t, graph), {12}), 0);
                                       },
                                       x, kEps)});
    }
    { // full model: input gradient plus a strided sample of every parameter
        ModelConfig mc = cfg.model;
        mc.seed = opt.seed;
        FusionModel model(mc);
        Tensor x = sample({2, mc.window_len, mc.num_channels}, 0.05, 0.95);
        Tensor target = sample({2}, 0.1, 0.9);
        auto loss_from_input = [&](const Tensor& t) {
            Tensor diff = sub(model.forward(t), target);
            return mean_axis(mul(diff, diff), 0);
        };
        checks.push_back({"model/input", finite_diff_check(loss_from_input, x, kEps)});
        checks.push_back({"model/parameters", parameter_gradient_check(model, x, target, kEps, 8)});
    }

    bool all_ok = true;
    for (Check& check : checks) {
        if (!opt.inject_fault.empty() && check.name == opt.inject_fault) {
            check.err = std::max(check.err, 0.5); // simulated broken backward rule
            std::printf("(fault injected into %s)\n", check.name.c_str());
        }
        bool ok = check.err < kTolerance;
        all_ok = all_ok && ok;
        std::printf("%-16s max_rel_err %.3e  %s\n", check.name.c_str(), check.err,
                    ok ? "PASS" : "FAIL");
    }
    if (!all_ok) {
        std::fprintf(stderr, "gradcheck: FAILED\n");
        return 2;
    }
    std::printf("gradcheck: all checks below %.0e\n", kTolerance);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial-temporal graph-attention sensor fusion harness"};
    app.require_subcommand(1);

    SynthOptions synth_opt;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus CSV");
    synth->add_option("--out", synth_opt.out, "Output CSV path")->required();
    synth->add_option("--len", synth_opt.length, "Number of hourly rows");
    synth->add_option("--seed", synth_opt.seed, "Generator seed");

    TrainOptions train_opt;
    auto* train_cmd = app.add_subcommand("train", "Train a fusion model");
    train_cmd->add_option("--data", train_opt.data, "Corpus CSV")->required();
    train_cmd->add_option("--config", train_opt.config, "Flat JSON config file");
    train_cmd->add_option("--out", train_opt.out, "Artifact directory");
    train_cmd->add_option("--seed", train_opt.seed, "Seed override");
    train_cmd->add_option("--max-epochs", train_opt.max_epochs, "Epoch budget override");
    train_cmd->add_option("--batch-size", train_opt.batch_size, "Batch size override");
    train_cmd->add_option("--patience", train_opt.patience, "Early-stopping patience override");
    train_cmd->add_option("--learning-rate", train_opt.learning_rate, "Learning rate override");

    EvaluateOptions eval_opt;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a saved model");
    evaluate->add_option("--data", eval_opt.data, "Corpus CSV")->required();
    evaluate->add_option("--model", eval_opt.model, "Model file (.stgf)")->required();
    evaluate->add_option("--out", eval_opt.out, "Optional metrics JSON path");

    ReportOptions ablate_opt;
    auto* ablate = app.add_subcommand("ablate", "Run the four-variant ablation");
    ablate->add_option("--data", ablate_opt.data, "Corpus CSV")->required();
    ablate->add_option("--config", ablate_opt.config, "Flat JSON config file");
    ablate->add_option("--out", ablate_opt.out, "Artifact directory");
    ablate->add_option("--seeds", ablate_opt.seeds, "Comma-separated seeds");

    ReportOptions baseline_opt;
    auto* baseline = app.add_subcommand("baseline", "Compare baselines on one corpus");
    baseline->add_option("--data", baseline_opt.data, "Corpus CSV")->required();
    baseline->add_option("--config", baseline_opt.config, "Flat JSON config file");
    baseline->add_option("--out", baseline_opt.out, "Artifact directory");
    baseline->add_option("--seeds", baseline_opt.seeds, "Comma-separated seeds");
    baseline->add_option("--kind", baseline_opt.kind, "MLR, MLP, CNN, LSTM, STGAT or all");

    GradcheckOptions grad_opt;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient gate");
    gradcheck->add_option("--config", grad_opt.config, "Flat JSON config file");
    gradcheck->add_option("--seed", grad_opt.seed, "Seed");
    gradcheck->add_option("--inject-fault", grad_opt.inject_fault, "Test fixture: corrupt one check")
        ->group(""); // hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_opt);
        if (train_cmd->parsed()) return cmd_train(train_opt);
        if (evaluate->parsed()) return cmd_evaluate(eval_opt);
        if (ablate->parsed()) return cmd_ablate(ablate_opt);
        if (baseline->parsed()) return cmd_baseline(baseline_opt);
        if (gradcheck->parsed()) return cmd_gradcheck(grad_opt);
    } catch (const ValueError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
