// SPDX-License-Identifier: Apache-2.0
#include "stgat/eval.hpp"

#include "stgat/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

namespace stgat {

namespace {

using nlohmann::json;

void check_lengths(const char* what, std::span<const double> pred, std::span<const double> target) {
    if (pred.empty()) {
        throw ValueError(std::string(what) + ": empty inputs");
    }
    if (pred.size() != target.size()) {
        throw ValueError(std::string(what) + ": length mismatch, " + std::to_string(pred.size()) +
                         " vs " + std::to_string(target.size()));
    }
}

} // namespace

double rmse(std::span<const double> pred, std::span<const double> target) {
    check_lengths("rmse", pred, target);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - target[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

double mae(std::span<const double> pred, std::span<const double> target) {
    check_lengths("mae", pred, target);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        acc += std::abs(pred[i] - target[i]);
    }
    return acc / static_cast<double>(pred.size());
}

std::string method_slug(const std::string& method) {
    std::string slug;
    for (char c : method) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            slug.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!slug.empty() && slug.back() != '_') {
            slug.push_back('_');
        }
    }
    while (!slug.empty() && slug.back() == '_') {
        slug.pop_back();
    }
    return slug;
}

namespace {

void write_run_metrics(const RunMetrics& m, const std::filesystem::path& path) {
    json j{{"seed", m.seed},
           {"rmse", m.rmse},
           {"mae", m.mae},
           {"scaled_test_mse", m.scaled_test_mse},
           {"best_val_mse", m.best_val_mse},
           {"best_epoch", m.best_epoch},
           {"stop_epoch", m.stop_epoch},
           {"stop_reason", m.stop_reason}};
    std::ofstream out(path);
    if (!out) {
        throw IoError("write_run_metrics: cannot open " + path.string());
    }
    out << j.dump(2) << '\n';
}

// Evaluates a ready model on the test split in physical units.
RunMetrics evaluate_on_test(const Regressor& model, const PreparedData& data,
                            std::size_t batch_size) {
    std::vector<double> pred = predict_all(model, data.test, batch_size);
    auto scaled_target = data.test.targets.values();
    double scaled_mse = 0.0;
    std::vector<double> pred_phys(pred.size());
    std::vector<double> target_phys(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - scaled_target[i];
        scaled_mse += d * d;
        pred_phys[i] = unscale_target(pred[i], data.scaler);
        target_phys[i] = unscale_target(scaled_target[i], data.scaler);
    }
    RunMetrics m;
    m.scaled_test_mse = scaled_mse / static_cast<double>(pred.size());
    m.rmse = rmse(pred_phys, target_phys);
    m.mae = mae(pred_phys, target_phys);
    return m;
}

struct Aggregate {
    double mean = 0.0;
    double population_std = 0.0;
};

Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    for (double v : values) {
        a.mean += v;
    }
    a.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) {
        double d = v - a.mean;
        var += d * d;
    }
    a.population_std = std::sqrt(var / static_cast<double>(values.size()));
    return a;
}

} // namespace

RunMetrics read_run_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("read_run_metrics: cannot open " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("read_run_metrics: " + path.string() + ": " + e.what());
    }
    RunMetrics m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.rmse = j.at("rmse").get<double>();
    m.mae = j.at("mae").get<double>();
    m.scaled_test_mse = j.at("scaled_test_mse").get<double>();
    m.best_val_mse = j.at("best_val_mse").get<double>();
    m.best_epoch = j.at("best_epoch").get<std::size_t>();
    m.stop_epoch = j.at("stop_epoch").get<std::size_t>();
    m.stop_reason = j.at("stop_reason").get<std::string>();
    return m;
}

ReportRow multi_run(const RegressorBuilder& builder, const PreparedData& data,
                    const TrainConfig& train_cfg, std::span<const std::uint64_t> seeds,
                    const std::filesystem::path& artifact_dir, const std::string& method) {
    if (seeds.empty()) {
        throw ValueError("multi_run: need at least one seed");
    }
    {
        std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
        if (unique.size() != seeds.size()) {
            std::cerr << "multi_run: warning: duplicate seeds, runs will be identical\n";
        }
    }

    ReportRow row;
    row.seeds.assign(seeds.begin(), seeds.end());

    // Closed-form models are deterministic; they run once regardless of the
    // seed list.
    {
        auto probe = builder(seeds[0]);
        row.method = method.empty() ? probe->name() : method;
        if (!probe->trainable()) {
            probe->fit(data.train);
            RunMetrics m = evaluate_on_test(*probe, data, train_cfg.batch_size);
            m.seed = seeds[0];
            m.stop_reason = "closed_form";
            row.runs.push_back(m);
            row.num_runs = 1;
            row.seeds = {seeds[0]};
            row.rmse_mean = m.rmse;
            row.mae_mean = m.mae;
            if (!artifact_dir.empty()) {
                auto dir = artifact_dir / method_slug(row.method) / ("seed_" + std::to_string(m.seed));
                std::filesystem::create_directories(dir);
                write_run_metrics(m, dir / "metrics.json");
            }
            return row;
        }
    }

    // Seeded runs are independent; spread them over the available cores. The
    // aggregation below walks results in seed order, so the report does not
    // depend on scheduling.
    std::size_t jobs = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("STGAT_JOBS")) {
        jobs = std::max<std::size_t>(1, static_cast<std::size_t>(std::atoll(env)));
    }
    jobs = std::min(jobs, seeds.size());

    std::vector<RunMetrics> runs(seeds.size());
    std::vector<std::exception_ptr> failures(seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t index = next.fetch_add(1);
            if (index >= seeds.size()) {
                return;
            }
            std::uint64_t seed = seeds[index];
            try {
                auto model = builder(seed);
                TrainConfig cfg = train_cfg;
                cfg.seed = seed;
                TrainResult outcome = train(*model, data.train, data.val, cfg);
                RunMetrics m = evaluate_on_test(*model, data, cfg.batch_size);
                m.seed = seed;
                m.best_val_mse = outcome.best_val_mse;
                m.best_epoch = outcome.best_epoch;
                m.stop_epoch = outcome.stop_epoch;
                m.stop_reason = outcome.stop_reason;
                runs[index] = m;
            } catch (...) {
                failures[index] = std::current_exception();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (std::size_t t = 0; t < jobs; ++t) {
            pool.emplace_back(worker);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (failures[i] != nullptr) {
            try {
                std::rethrow_exception(failures[i]);
            } catch (const std::exception& e) {
                throw Error("multi_run: seed " + std::to_string(seeds[i]) + ": " + e.what());
            }
        }
    }
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        row.runs.push_back(runs[i]);
        if (!artifact_dir.empty()) {
            auto dir =
                artifact_dir / method_slug(row.method) / ("seed_" + std::to_string(seeds[i]));
            std::filesystem::create_directories(dir);
            write_run_metrics(runs[i], dir / "metrics.json");
        }
    }
    row.num_runs = row.runs.size();

    std::vector<double> rmses, maes;
    for (const RunMetrics& m : row.runs) {
        rmses.push_back(m.rmse);
        maes.push_back(m.mae);
    }
    Aggregate ar = aggregate(rmses);
    Aggregate am = aggregate(maes);
    row.rmse_mean = ar.mean;
    row.mae_mean = am.mean;
    if (row.num_runs > 1) {
        row.rmse_std = ar.population_std;
        row.mae_std = am.population_std;
    }
    return row;
}

EvalReport run_ablation(const PreparedData& data, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg, std::span<const std::uint64_t> seeds,
                        const std::filesystem::path& artifact_dir) {
    auto variants = ablation_variants(model_cfg);
    EvalReport report;
    // Published ablation order: the three reduced variants, full model last.
    const std::array<std::size_t, 4> order{1, 2, 3, 0};
    for (std::size_t v : order) {
        const auto& [label, cfg] = variants[v];
        RegressorBuilder builder = [cfg](std::uint64_t seed) -> std::unique_ptr<Regressor> {
            ModelConfig seeded = cfg;
            seeded.seed = seed;
            return std::make_unique<FusionModel>(seeded);
        };
        report.rows.push_back(multi_run(builder, data, train_cfg, seeds, artifact_dir, label));
    }
    return report;
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "method,rmse_mean,rmse_std,mae_mean,mae_std,num_runs,seeds\n";
    char buffer[64];
    for (const ReportRow& row : rows) {
        out << row.method << ',';
        std::snprintf(buffer, sizeof(buffer), "%.17g", row.rmse_mean);
        out << buffer << ',';
        if (row.rmse_std) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", *row.rmse_std);
            out << buffer;
        }
        out << ',';
        std::snprintf(buffer, sizeof(buffer), "%.17g", row.mae_mean);
        out << buffer << ',';
        if (row.mae_std) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", *row.mae_std);
            out << buffer;
        }
        out << ',' << row.num_runs << ',';
        for (std::size_t i = 0; i < row.seeds.size(); ++i) {
            if (i > 0) {
                out << ';';
            }
            out << row.seeds[i];
        }
        out << '\n';
    }
    return out.str();
}

std::string EvalReport::to_table() const {
    auto cell = [](double mean, const std::optional<double>& std_dev) {
        char buffer[64];
        if (std_dev) {
            std::snprintf(buffer, sizeof(buffer), "%.3f ± %.2f", mean, *std_dev);
        } else {
            std::snprintf(buffer, sizeof(buffer), "%.3f", mean);
        }
        return std::string(buffer);
    };

    std::size_t method_width = std::string("Method").size();
    for (const ReportRow& row : rows) {
        method_width = std::max(method_width, row.method.size());
    }
    // The ± sign is two bytes in UTF-8; pad on display width, not byte count.
    auto display_width = [](const std::string& s) {
        std::size_t extra = 0;
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            if (static_cast<unsigned char>(s[i]) == 0xC2 &&
                static_cast<unsigned char>(s[i + 1]) == 0xB1) {
                ++extra;
            }
        }
        return s.size() - extra;
    };

    std::ostringstream out;
    out << "Method";
    out << std::string(method_width - 6, ' ');
    out << "  RMSE (ug/m3)      MAE (ug/m3)\n";
    for (const ReportRow& row : rows) {
        std::string r = cell(row.rmse_mean, row.rmse_std);
        std::string m = cell(row.mae_mean, row.mae_std);
        out << row.method << std::string(method_width - row.method.size(), ' ') << "  ";
        out << r;
        if (display_width(r) < 16) {
            out << std::string(16 - display_width(r), ' ');
        }
        out << "  " << m << '\n';
    }
    return out.str();
}

} // namespace stgat
