// SPDX-License-Identifier: Apache-2.0
#include "stgat/gat.hpp"

#include "stgat/errors.hpp"

#include <algorithm>

namespace stgat {

namespace {
constexpr double kMaskValue = -1e30;
}

Graph Graph::complete(std::size_t n, bool self_loops) {
    if (n == 0) {
        throw ValueError("Graph::complete: need at least one node");
    }
    if (n == 1 && !self_loops) {
        throw ValueError("Graph::complete: a single node needs a self loop");
    }
    Graph g;
    g.num_nodes = n;
    g.neighbors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i && !self_loops) {
                continue;
            }
            g.neighbors[i].push_back(j);
        }
    }
    return g;
}

void Graph::validate() const {
    if (num_nodes == 0) {
        throw ValueError("Graph: need at least one node");
    }
    if (neighbors.size() != num_nodes) {
        throw ValueError("Graph: neighbor table has " + std::to_string(neighbors.size()) +
                         " rows for " + std::to_string(num_nodes) + " nodes");
    }
    for (std::size_t i = 0; i < num_nodes; ++i) {
        if (neighbors[i].empty()) {
            throw ValueError("Graph: node " + std::to_string(i) + " has no neighbors");
        }
        for (std::size_t j : neighbors[i]) {
            if (j >= num_nodes) {
                throw ValueError("Graph: node " + std::to_string(i) + " lists neighbor " +
                                 std::to_string(j) + " outside the node set");
            }
        }
    }
}

bool Graph::has_edge(std::size_t from, std::size_t to) const {
    const auto& list = neighbors[from];
    return std::find(list.begin(), list.end(), to) != list.end();
}

Tensor Graph::attention_mask() const {
    std::vector<double> mask(num_nodes * num_nodes, kMaskValue);
    for (std::size_t i = 0; i < num_nodes; ++i) {
        for (std::size_t j : neighbors[i]) {
            mask[i * num_nodes + j] = 0.0;
        }
    }
    return Tensor::from_values({num_nodes, num_nodes}, std::move(mask));
}

Gatv2Layer Gatv2Layer::init(std::size_t in_dim, std::size_t att_dim, std::size_t out_dim,
                            double leaky_slope, Rng& rng) {
    if (in_dim == 0 || att_dim == 0 || out_dim == 0) {
        throw ValueError("Gatv2Layer: dimensions must be positive");
    }
    Gatv2Layer layer;
    layer.attn_weight = init_weight({att_dim, 2 * in_dim}, 2 * in_dim, rng);
    layer.attn_vector = init_weight({att_dim}, att_dim, rng);
    layer.value_weight = init_weight({out_dim, in_dim}, in_dim, rng);
    layer.leaky_slope = leaky_slope;
    return layer;
}

namespace {

void check_features(const char* what, const Tensor& features, const Graph& graph,
                    std::size_t in_dim) {
    const Shape& s = features.shape();
    std::size_t rank = s.size();
    if (rank != 2 && rank != 3) {
        throw ShapeError(std::string(what) + ": expects [nodes x features] or "
                                             "[batch x nodes x features], got " +
                         shape_str(s));
    }
    if (s[rank - 2] != graph.num_nodes) {
        throw ShapeError(std::string(what) + ": " + std::to_string(s[rank - 2]) +
                         " feature rows for " + std::to_string(graph.num_nodes) + " graph nodes");
    }
    if (s[rank - 1] != in_dim) {
        throw ShapeError(std::string(what) + ": feature dim " + std::to_string(s[rank - 1]) +
                         " does not match layer input dim " + std::to_string(in_dim));
    }
}

// Pairwise scores for [batch x n x d] features: e[b, i, j].
Tensor batched_scores(const Gatv2Layer& layer, const Tensor& features) {
    const Shape& s = features.shape();
    std::size_t batch = s[0];
    std::size_t n = s[1];
    std::size_t d = s[2];
    std::size_t att = layer.att_dim();

    // W_a [h_i || h_j] splits into a query part and a key part.
    Tensor query_w = slice(layer.attn_weight, 1, 0, d);
    Tensor key_w = slice(layer.attn_weight, 1, d, 2 * d);
    Tensor flat = reshape(features, {batch * n, d});
    Tensor query = reshape(matmul_t(flat, query_w), {batch, n, 1, att});
    Tensor key = reshape(matmul_t(flat, key_w), {batch, 1, n, att});
    Tensor activated = leaky_relu(add(query, key), layer.leaky_slope);
    Tensor scores = matmul_t(reshape(activated, {batch * n * n, att}),
                             reshape(layer.attn_vector, {1, att}));
    return reshape(scores, {batch, n, n});
}

Tensor batched_forward(const Gatv2Layer& layer, const Tensor& features, const Graph& graph) {
    const Shape& s = features.shape();
    std::size_t batch = s[0];
    std::size_t n = s[1];
    std::size_t d = s[2];

    Tensor scores = batched_scores(layer, features);
    Tensor alpha = softmax_axis(add(scores, graph.attention_mask()), 2);

    Tensor flat = reshape(features, {batch * n, d});
    Tensor values = reshape(matmul_t(flat, layer.value_weight),
                            {batch, 1, n, layer.out_dim()});
    Tensor weighted = mul(reshape(alpha, {batch, n, n, 1}), values);
    return leaky_relu(sum_axis(weighted, 2), layer.leaky_slope);
}

} // namespace

Tensor Gatv2Layer::scores(const Tensor& features, const Graph& graph) const {
    graph.validate();
    check_features("gatv2_scores", features, graph, in_dim());
    std::size_t n = graph.num_nodes;
    Tensor batched = batched_scores(*this, reshape(features, {1, n, in_dim()}));
    return reshape(batched, {n, n});
}

Tensor Gatv2Layer::attention(const Tensor& scores, const Graph& graph) {
    graph.validate();
    const Shape& s = scores.shape();
    if (s.size() != 2 || s[0] != graph.num_nodes || s[1] != graph.num_nodes) {
        throw ShapeError("gatv2_attention: scores must be " +
                         shape_str({graph.num_nodes, graph.num_nodes}) + ", got " + shape_str(s));
    }
    return softmax_axis(add(scores, graph.attention_mask()), 1);
}

Tensor Gatv2Layer::aggregate(const Tensor& features, const Tensor& alpha) const {
    const Shape& fs = features.shape();
    if (fs.size() != 2 || fs[1] != in_dim()) {
        throw ShapeError("gatv2_aggregate: features must be [nodes x " + std::to_string(in_dim()) +
                         "], got " + shape_str(fs));
    }
    const Shape& as = alpha.shape();
    if (as.size() != 2 || as[0] != fs[0] || as[1] != fs[0]) {
        throw ShapeError("gatv2_aggregate: alpha must be " + shape_str({fs[0], fs[0]}) + ", got " +
                         shape_str(as));
    }
    Tensor values = matmul_t(features, value_weight);
    return leaky_relu(matmul(alpha, values), leaky_slope);
}

Tensor Gatv2Layer::forward(const Tensor& features, const Graph& graph) const {
    graph.validate();
    check_features("gatv2", features, graph, in_dim());
    std::size_t n = graph.num_nodes;
    Tensor batched = batched_forward(*this, reshape(features, {1, n, in_dim()}), graph);
    return reshape(batched, {n, out_dim()});
}

Tensor Gatv2Layer::forward_batch(const Tensor& features, const Graph& graph) const {
    graph.validate();
    check_features("gatv2", features, graph, in_dim());
    if (features.rank() != 3) {
        throw ShapeError("gatv2: batched forward expects rank-3 features, got " +
                         shape_str(features.shape()));
    }
    return batched_forward(*this, features, graph);
}

std::vector<std::vector<double>> Gatv2Layer::score_lists(const Tensor& features,
                                                         const Graph& graph) const {
    Tensor dense = scores(features, graph);
    auto values = dense.values();
    std::size_t n = graph.num_nodes;
    std::vector<std::vector<double>> lists(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : graph.neighbors[i]) {
            lists[i].push_back(values[i * n + j]);
        }
    }
    return lists;
}

std::vector<std::vector<double>> Gatv2Layer::attention_lists(const Tensor& features,
                                                             const Graph& graph) const {
    Tensor alpha = attention(scores(features, graph), graph);
    auto values = alpha.values();
    std::size_t n = graph.num_nodes;
    std::vector<std::vector<double>> lists(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : graph.neighbors[i]) {
            lists[i].push_back(values[i * n + j]);
        }
    }
    return lists;
}

} // namespace stgat
