// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stgat/rng.hpp"
#include "stgat/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace test_support {

// Uniform values in [lo, hi] kept away from zero so LeakyReLU kinks cannot
// fall inside a finite-difference step.
inline stgat::Tensor random_tensor(stgat::Shape shape, stgat::Rng& rng, double lo = -2.0,
                                   double hi = 2.0, double keep_out = 1e-3) {
    std::size_t n = stgat::shape_size(shape);
    std::vector<double> values(n);
    for (double& v : values) {
        do {
            v = rng.uniform(lo, hi);
        } while (std::abs(v) < keep_out);
    }
    return stgat::Tensor::from_values(std::move(shape), std::move(values));
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= static_cast<double>(a.size());
    mean_b /= static_cast<double>(a.size());
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double da = a[i] - mean_a;
        double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    return cov / std::sqrt(var_a * var_b);
}

// Direct evaluation of the GATv2 scoring rule with plain double arithmetic,
// independent of the tensor library: a^T LeakyReLU(W [h_i || h_j]).
inline double reference_gat_score(const std::vector<std::vector<double>>& attn_weight,
                                  const std::vector<double>& attn_vector,
                                  const std::vector<double>& query,
                                  const std::vector<double>& key, double slope) {
    std::vector<double> cat(query);
    cat.insert(cat.end(), key.begin(), key.end());
    double score = 0.0;
    for (std::size_t r = 0; r < attn_weight.size(); ++r) {
        double pre = 0.0;
        for (std::size_t c = 0; c < cat.size(); ++c) {
            pre += attn_weight[r][c] * cat[c];
        }
        score += attn_vector[r] * (pre > 0.0 ? pre : slope * pre);
    }
    return score;
}

// Dense linear solve by Gauss-Jordan elimination with partial pivoting; the
// independent route for checking the MLR fit.
inline std::vector<double> gauss_jordan_solve(std::vector<double> a, std::vector<double> b,
                                              std::size_t n) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) {
                pivot = r;
            }
        }
        for (std::size_t c = 0; c < n; ++c) {
            std::swap(a[col * n + c], a[pivot * n + c]);
        }
        std::swap(b[col], b[pivot]);
        double diag = a[col * n + col];
        for (std::size_t c = 0; c < n; ++c) {
            a[col * n + c] /= diag;
        }
        b[col] /= diag;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) {
                continue;
            }
            double factor = a[r * n + col];
            if (factor == 0.0) {
                continue;
            }
            for (std::size_t c = 0; c < n; ++c) {
                a[r * n + c] -= factor * a[col * n + c];
            }
            b[r] -= factor * b[col];
        }
    }
    return b;
}

// Scratch directory unique to a test binary run.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int attempt = 0; attempt < 1000; ++attempt) {
            auto candidate = base / (tag + "_" + std::to_string(std::rand()) + "_" +
                                     std::to_string(attempt));
            std::error_code ec;
            if (std::filesystem::create_directories(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("TempDir: could not create a scratch directory");
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace test_support
