#include "swg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace swg {

AggregatorKind aggregator_from_string(const std::string& s) {
    if (s == "conv2d_agg") return AggregatorKind::conv2d_agg;
    if (s == "max_relative" || s == "mr") return AggregatorKind::max_relative;
    if (s == "sage_mean" || s == "sage") return AggregatorKind::sage_mean;
    if (s == "gin_sum" || s == "gin") return AggregatorKind::gin_sum;
    throw std::invalid_argument("unknown aggregator kind: " + s);
}

std::string to_string(AggregatorKind kind) {
    switch (kind) {
        case AggregatorKind::conv2d_agg: return "conv2d_agg";
        case AggregatorKind::max_relative: return "max_relative";
        case AggregatorKind::sage_mean: return "sage_mean";
        case AggregatorKind::gin_sum: return "gin_sum";
    }
    return "?";
}

std::vector<GraphChunk> chunk_time(const Var& x, size_t t) {
    const auto& xs = x.shape();
    if (xs.size() != 3)
        throw std::invalid_argument("chunk_time: expected [T x F x C], got " +
                                    x.value().shape_str());
    size_t T = xs[0], F = xs[1], C = xs[2];
    if (t == 0 || T % t != 0)
        throw std::invalid_argument("chunk_time: window t=" + std::to_string(t) +
                                    " does not divide T=" + std::to_string(T));
    size_t N = T / t;
    std::vector<GraphChunk> chunks;
    chunks.reserve(N);
    for (size_t j = 0; j < N; ++j) {
        Var frames = slice(x, 0, j * t, t);            // [t x F x C]
        Var flat = reshape(frames, {t, F * C});        // [t x n]
        GraphChunk ch;
        ch.vertex_features = transpose(flat);          // [n x t]
        ch.chunk_index = j;
        ch.F = F;
        ch.C = C;
        chunks.push_back(std::move(ch));
    }
    return chunks;
}

Var unchunk(const std::vector<GraphChunk>& chunks) {
    if (chunks.empty()) throw std::invalid_argument("unchunk: no chunks");
    std::vector<Var> parts;
    parts.reserve(chunks.size());
    for (const auto& ch : chunks) {
        size_t t = ch.vertex_features.shape()[1];
        parts.push_back(reshape(transpose(ch.vertex_features), {t, ch.F, ch.C}));
    }
    return concat(parts, 0);
}

NeighborIndex knn_graph(const Tensor& vertex_features, size_t k) {
    const auto& s = vertex_features.shape();
    if (s.size() != 2)
        throw std::invalid_argument("knn_graph: expected [n x t] features, got " +
                                    vertex_features.shape_str());
    size_t n = s[0], t = s[1];
    if (k < 1 || k >= n)
        throw std::invalid_argument("knn_graph: need 1 <= k < n, got k=" + std::to_string(k) +
                                    ", n=" + std::to_string(n));
    NeighborIndex nbrs;
    nbrs.n = n;
    nbrs.k = k;
    nbrs.indices.resize(n * k);
    nbrs.distances.resize(n * k);
    const double* f = vertex_features.data();
    std::vector<std::pair<double, size_t>> cand(n - 1);
    for (size_t i = 0; i < n; ++i) {
        size_t c = 0;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = 0.0;
            const double* a = f + i * t;
            const double* b = f + j * t;
            for (size_t u = 0; u < t; ++u) {
                double diff = a[u] - b[u];
                d += diff * diff;
            }
            cand[c++] = {d, j};
        }
        // ascending distance, ties by ascending vertex id (pair order)
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        for (size_t r = 0; r < k; ++r) {
            nbrs.indices[i * k + r] = cand[r].second;
            nbrs.distances[i * k + r] = cand[r].first;
        }
    }
    return nbrs;
}

namespace {

// [n*k x t] rows in (vertex, rank) order.
Var gather_neighbors(const Var& h, const NeighborIndex& nbrs) {
    if (h.shape().size() != 2 || h.shape()[0] != nbrs.n)
        throw std::invalid_argument("aggregation: neighbor table for n=" + std::to_string(nbrs.n) +
                                    " does not match features " + h.value().shape_str());
    return index_select0(h, nbrs.indices);
}

}  // namespace

Var conv2d_agg(const Var& h, const NeighborIndex& nbrs, const Var& weights, const Var& bias) {
    size_t n = nbrs.n, k = nbrs.k;
    if (weights.numel() != k)
        throw std::invalid_argument("conv2d_agg: expected " + std::to_string(k) +
                                    " rank weights, got " + std::to_string(weights.numel()));
    size_t t = h.shape()[1];
    Var gathered = gather_neighbors(h, nbrs);                 // [n*k x t]
    Var block = permute(reshape(gathered, {n, k, t}), {0, 2, 1});  // [n x t x k]
    Var image = reshape(block, {1, 1, n * t, k});
    Var kernel = reshape(weights, {1, 1, 1, k});
    Var conv = conv2d(image, kernel);                         // [1 x 1 x n*t x 1]
    return add(reshape(conv, {n, t}), bias);
}

Var baseline_agg(const Var& h, const NeighborIndex& nbrs, AggregatorKind kind,
                 const Var& gin_eps) {
    size_t n = nbrs.n, k = nbrs.k;
    size_t t = h.shape()[1];
    Var gathered = reshape(gather_neighbors(h, nbrs), {n, k, t});
    switch (kind) {
        case AggregatorKind::max_relative:
            return reduce_max(sub(gathered, reshape(h, {n, 1, t})), 1);
        case AggregatorKind::sage_mean:
            return mean_axes(gathered, {1}, false);
        case AggregatorKind::gin_sum:
            return add(mul(h, add_scalar(gin_eps, 1.0)), sum_axes(gathered, {1}, false));
        default:
            throw std::invalid_argument("baseline_agg: not a baseline kind: " + to_string(kind));
    }
}

Var vertex_update(const Var& h, const Var& g, VertexUpdateParams& p, bool training) {
    if (h.shape() != g.shape())
        throw std::invalid_argument("vertex_update: h " + h.value().shape_str() + " vs g " +
                                    g.value().shape_str());
    Var cat = concat({h, g}, 1);  // [n x 2t]
    Var lin = linear(cat, p.weight, p.bias);
    Var bn = batch_norm(lin, p.bn_gamma, p.bn_beta, 1, p.bn_stats, training);
    return gelu(bn);
}

Var transform_ffn(const Var& g, const TransformFfnParams& p) {
    return add(matmul(gelu(matmul(g, p.w1)), p.w2), g);
}

void SwgModuleParams::init(size_t t, size_t k, size_t ffn_ratio, AggregatorKind kind_, Rng& rng) {
    kind = kind_;
    auto xavier = [&rng](size_t in, size_t out) {
        Tensor w({in, out});
        double s = std::sqrt(2.0 / double(in + out));
        for (size_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, s);
        return w;
    };
    agg_weights = make_parameter(Tensor::full({k}, 1.0 / double(k)));
    agg_bias = make_parameter(Tensor::zeros({1}));
    gin_eps = make_parameter(Tensor::zeros({1}));
    update.weight = make_parameter(xavier(2 * t, t));
    update.bias = make_parameter(Tensor::zeros({t}));
    update.bn_gamma = make_parameter(Tensor::ones({t}));
    update.bn_beta = make_parameter(Tensor::zeros({t}));
    update.bn_stats = BatchNormStats{};
    ffn.w1 = make_parameter(xavier(t, ffn_ratio * t));
    ffn.w2 = make_parameter(xavier(ffn_ratio * t, t));
}

std::vector<Var> SwgModuleParams::parameters() {
    std::vector<Var> out{update.weight, update.bias, update.bn_gamma, update.bn_beta,
                         ffn.w1, ffn.w2};
    if (kind == AggregatorKind::conv2d_agg) {
        out.push_back(agg_weights);
        out.push_back(agg_bias);
    } else if (kind == AggregatorKind::gin_sum) {
        out.push_back(gin_eps);
    }
    return out;
}

Var swg_module_forward(const Var& x, size_t t, size_t k, SwgModuleParams& p, bool training) {
    auto chunks = chunk_time(x, t);
    size_t n = chunks.front().vertex_features.shape()[0];
    if (k >= n)
        throw std::invalid_argument("swg_module: k=" + std::to_string(k) +
                                    " must be < n=" + std::to_string(n));
    for (auto& ch : chunks) {
        const Var& h = ch.vertex_features;
        NeighborIndex nbrs = knn_graph(h.value(), k);
        Var agg = (p.kind == AggregatorKind::conv2d_agg)
                      ? conv2d_agg(h, nbrs, p.agg_weights, p.agg_bias)
                      : baseline_agg(h, nbrs, p.kind, p.gin_eps);
        Var updated = vertex_update(h, agg, p.update, training);
        ch.vertex_features = transform_ffn(updated, p.ffn);
    }
    return unchunk(chunks);
}

std::string neighbor_table_csv(const NeighborIndex& nbrs) {
    std::ostringstream ss;
    ss << "vertex_id,rank,neighbor_id,distance\n";
    for (size_t i = 0; i < nbrs.n; ++i)
        for (size_t r = 0; r < nbrs.k; ++r)
            ss << i << ',' << r << ',' << nbrs.indices[i * nbrs.k + r] << ','
               << std::sqrt(nbrs.distances[i * nbrs.k + r]) << '\n';
    return ss.str();
}

}  // namespace swg
