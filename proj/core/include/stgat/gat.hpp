// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stgat/layers.hpp"
#include "stgat/rng.hpp"
#include "stgat/tensor.hpp"

#include <vector>

namespace stgat {

// Node set with explicit neighborhoods. Every node must have at least one
// neighbor; whether a node neighbors itself is decided at construction time.
struct Graph {
    std::size_t num_nodes = 0;
    std::vector<std::vector<std::size_t>> neighbors;

    static Graph complete(std::size_t n, bool self_loops);

    void validate() const;
    bool has_edge(std::size_t from, std::size_t to) const;

    /// [n x n] additive mask: 0 on edges, a large negative constant elsewhere,
    /// so that a masked softmax row puts exactly zero weight on non-neighbors.
    Tensor attention_mask() const;
};

// GATv2 attention layer. Scoring follows
//   e(h_i, h_j) = a^T LeakyReLU(W_a [h_i || h_j])
// with a separate value transform W_v for the aggregation
//   h'_i = act( sum_j alpha_ij W_v h_j ),   alpha_i = softmax over N(i).
struct Gatv2Layer {
    Tensor attn_weight;   // W_a: [att_dim x 2*in_dim]
    Tensor attn_vector;   // a:   [att_dim]
    Tensor value_weight;  // W_v: [out_dim x in_dim]
    double leaky_slope = kDefaultLeakySlope;

    static Gatv2Layer init(std::size_t in_dim, std::size_t att_dim, std::size_t out_dim,
                           double leaky_slope, Rng& rng);

    std::size_t in_dim() const { return value_weight.shape()[1]; }
    std::size_t att_dim() const { return attn_weight.shape()[0]; }
    std::size_t out_dim() const { return value_weight.shape()[0]; }

    /// Dense pairwise scores e_ij for features [n x in_dim]; entry (i, j) is
    /// meaningful whenever j is a neighbor of i.
    Tensor scores(const Tensor& features, const Graph& graph) const;

    /// Masked softmax of the scores over each node's neighborhood. Row i sums
    /// to 1 and carries exactly zero on non-neighbors.
    static Tensor attention(const Tensor& scores, const Graph& graph);

    /// Weighted aggregation of transformed neighbor features followed by the
    /// LeakyReLU output activation. alpha is a dense [n x n] attention matrix.
    Tensor aggregate(const Tensor& features, const Tensor& alpha) const;

    /// scores -> attention -> aggregate for a single node set.
    Tensor forward(const Tensor& features, const Graph& graph) const;

    /// Batched forward: [batch x n x in_dim] -> [batch x n x out_dim].
    Tensor forward_batch(const Tensor& features, const Graph& graph) const;

    /// Ragged per-node views used by tests and diagnostics: element i holds
    /// the values for node i's neighbors in neighbor-list order.
    std::vector<std::vector<double>> score_lists(const Tensor& features, const Graph& graph) const;
    std::vector<std::vector<double>> attention_lists(const Tensor& features,
                                                     const Graph& graph) const;

    std::vector<Tensor> parameters() const { return {attn_weight, attn_vector, value_weight}; }
};

} // namespace stgat
