#pragma once

#include <string>
#include <vector>

#include "swg/graph.hpp"

namespace swg {

struct LinearLayer {
    Var w, b;
    void init(size_t in, size_t out, Rng& rng);
    void init_zero(size_t in, size_t out);
    Var apply(const Var& x) const { return linear(x, w, b); }
};

struct LayerNormParams {
    Var gamma, beta;
    void init(size_t d) {
        gamma = make_parameter(Tensor::ones({d}));
        beta = make_parameter(Tensor::zeros({d}));
    }
    Var apply(const Var& x) const { return layer_norm(x, gamma, beta); }
};

// Macaron feed-forward: x + 0.5*Dropout(L2(Dropout(Swish(L1(LN(x)))))).
struct FfParams {
    LayerNormParams ln;
    LinearLayer l1, l2;  // d -> ratio*d -> d
    void init(size_t d, size_t ratio, Rng& rng);
    std::vector<Var> parameters();
};
Var ff_forward(const Var& x, FfParams& p, double dropout_rate, bool training, Rng& rng);

// Pre-norm multi-head self-attention with 1/sqrt(d_head) scaling:
// x + Dropout(Wo(concat_heads(softmax(QK^T/sqrt(dh)) V))).
struct MhsaParams {
    LayerNormParams ln;
    LinearLayer wq, wk, wv, wo;
    size_t n_heads = 8;
    void init(size_t d, size_t n_heads, Rng& rng);
    std::vector<Var> parameters();
};
Var mhsa_forward(const Var& x, MhsaParams& p, double dropout_rate, bool training, Rng& rng);

struct SwgBlockConfig {
    size_t t = 5;           // sliding-window size
    size_t k = 24;          // neighbors
    AggregatorKind aggregator = AggregatorKind::conv2d_agg;
    size_t d_model = 512;   // F*C of the block input
    size_t n_heads = 8;
    size_t ff_ratio = 4;
    size_t graph_ffn_ratio = 4;
    double dropout_rate = 0.05;
    std::vector<std::string> module_order{"ff", "mhsa", "swg", "ff"};

    void validate() const;
};

struct SwgBlockParams {
    FfParams ff1, ff2;
    MhsaParams mhsa;
    LayerNormParams swg_ln;
    SwgModuleParams swg;
    LayerNormParams final_ln;
    void init(const SwgBlockConfig& cfg, Rng& rng);
    std::vector<Var> parameters();
};

// Input [T x F x C]; FF/MHSA see it as a length-T sequence of d_model = F*C
// vectors, the SwG module sees the F-C vertex domain. A final LayerNorm
// closes the block.
Var swg_former_block_forward(const Var& x, const SwgBlockConfig& cfg, SwgBlockParams& p,
                             bool training, Rng& rng);

// MS-Conv input block.
struct ConvBn {
    Var kernel;  // [Cout x Cin x kh x kw], no bias (BN follows)
    Var bn_gamma, bn_beta;
    BatchNormStats bn_stats;
    size_t pad = 1;
    void init(size_t cin, size_t cout, size_t ksize, Rng& rng);
    Var apply(const Var& x, bool training);
};

struct MsConvParams {
    ConvBn c3a, c3b;  // 3x3 dual conv
    ConvBn c5a, c5b;  // 5x5 dual conv
    Var proj;         // 1x1 residual projection, defined only when cin != cout
    Var w1, w2, w3;   // learnable fusion scalars, init 1
    size_t cin = 0, cout = 0;
    void init(size_t cin, size_t cout, Rng& rng);
    std::vector<Var> parameters();
};

// x [B x Cin x T x F] -> [B x Cout x T x F/2]; F must be even.
// out = Dropout(MaxPool(1,2)(w1*dual3(x) + w2*dual5(x) + w3*proj(x))).
Var ms_conv_forward(const Var& x, MsConvParams& p, double dropout_rate, bool training, Rng& rng);

// Absolute sinusoidal positional encoding [T x d], added once before the
// block stack.
Tensor sinusoidal_positions(size_t T, size_t d);

}  // namespace swg
