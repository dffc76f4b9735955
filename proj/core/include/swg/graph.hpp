#pragma once

#include <string>
#include <vector>

#include "swg/ops.hpp"

namespace swg {

// One sliding-window chunk viewed in the F-C vertex domain: n = F*C vertices,
// each carrying a t-dimensional temporal feature vector.
struct GraphChunk {
    Var vertex_features;  // [n x t], vertex id = f*C + c
    size_t chunk_index = 0;
    size_t F = 0;
    size_t C = 0;
};

// Row i holds the k nearest neighbors of vertex i, sorted by ascending
// squared distance, ties by ascending vertex id; self excluded.
struct NeighborIndex {
    size_t n = 0;
    size_t k = 0;
    std::vector<size_t> indices;    // n*k
    std::vector<double> distances;  // n*k squared distances, same order
    size_t at(size_t vertex, size_t rank) const { return indices[vertex * k + rank]; }
};

enum class AggregatorKind { conv2d_agg, max_relative, sage_mean, gin_sum };
AggregatorKind aggregator_from_string(const std::string& s);
std::string to_string(AggregatorKind kind);

// Split [T x F x C] into N = T/t chunks along time; t must divide T.
std::vector<GraphChunk> chunk_time(const Var& x, size_t t);
// Exact inverse of chunk_time.
Var unchunk(const std::vector<GraphChunk>& chunks);

// Similarity = negative squared Euclidean distance between t-dim vertex
// features; rebuilt from current features on every call (dynamic graph).
NeighborIndex knn_graph(const Tensor& vertex_features, size_t k);

// Rank-positional aggregation: one learned weight per neighbor rank shared
// across vertices and temporal positions, realized as a 1 x k convolution
// over the gathered n x k x t block. weights [k], bias [1].
Var conv2d_agg(const Var& h, const NeighborIndex& nbrs, const Var& weights, const Var& bias);

// max_relative: max_j(h_j - h_i); sage_mean: mean_j(h_j);
// gin_sum: (1+eps)*h_i + sum_j h_j with learnable eps [1].
Var baseline_agg(const Var& h, const NeighborIndex& nbrs, AggregatorKind kind, const Var& gin_eps);

// MLP updater f: GeLU(BatchNorm(Linear([h || g]))), 2t -> t.
struct VertexUpdateParams {
    Var weight;  // [2t x t]
    Var bias;    // [t]
    Var bn_gamma, bn_beta;
    BatchNormStats bn_stats;
};
Var vertex_update(const Var& h, const Var& g, VertexUpdateParams& p, bool training);

// Y = GeLU(G' W1) W2 + G' with W1 [t x r*t], W2 [r*t x t].
struct TransformFfnParams {
    Var w1, w2;
};
Var transform_ffn(const Var& g, const TransformFfnParams& p);

struct SwgModuleParams {
    AggregatorKind kind = AggregatorKind::conv2d_agg;
    Var agg_weights, agg_bias;  // conv2d_agg
    Var gin_eps;                // gin_sum
    VertexUpdateParams update;
    TransformFfnParams ffn;

    void init(size_t t, size_t k, size_t ffn_ratio, AggregatorKind kind, Rng& rng);
    std::vector<Var> parameters();
};

// Per chunk: knn_graph -> aggregate -> vertex_update -> transform_ffn, then
// chunks re-concatenated along time. Parameters shared across chunks.
Var swg_module_forward(const Var& x, size_t t, size_t k, SwgModuleParams& p, bool training);

// Debug dump: vertex_id,rank,neighbor_id,distance rows.
std::string neighbor_table_csv(const NeighborIndex& nbrs);

}  // namespace swg
