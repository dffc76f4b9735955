#include "swg/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace swg {

namespace {

Tensor xavier(size_t in, size_t out, Rng& rng) {
    Tensor w({in, out});
    double s = std::sqrt(2.0 / double(in + out));
    for (size_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, s);
    return w;
}

}  // namespace

void LinearLayer::init(size_t in, size_t out, Rng& rng) {
    w = make_parameter(xavier(in, out, rng));
    b = make_parameter(Tensor::zeros({out}));
}

void LinearLayer::init_zero(size_t in, size_t out) {
    w = make_parameter(Tensor::zeros({in, out}));
    b = make_parameter(Tensor::zeros({out}));
}

void FfParams::init(size_t d, size_t ratio, Rng& rng) {
    ln.init(d);
    l1.init(d, ratio * d, rng);
    l2.init(ratio * d, d, rng);
}

std::vector<Var> FfParams::parameters() {
    return {ln.gamma, ln.beta, l1.w, l1.b, l2.w, l2.b};
}

Var ff_forward(const Var& x, FfParams& p, double dropout_rate, bool training, Rng& rng) {
    Var h = p.ln.apply(x);
    h = swish(p.l1.apply(h));
    h = dropout(h, dropout_rate, training, rng);
    h = p.l2.apply(h);
    h = dropout(h, dropout_rate, training, rng);
    return add(x, mul_scalar(h, 0.5));
}

void MhsaParams::init(size_t d, size_t heads, Rng& rng) {
    if (heads == 0 || d % heads != 0)
        throw std::invalid_argument("mhsa: d_model=" + std::to_string(d) +
                                    " not divisible by n_heads=" + std::to_string(heads));
    n_heads = heads;
    ln.init(d);
    wq.init(d, d, rng);
    wk.init(d, d, rng);
    wv.init(d, d, rng);
    wo.init(d, d, rng);
}

std::vector<Var> MhsaParams::parameters() {
    return {ln.gamma, ln.beta, wq.w, wq.b, wk.w, wk.b, wv.w, wv.b, wo.w, wo.b};
}

Var mhsa_forward(const Var& x, MhsaParams& p, double dropout_rate, bool training, Rng& rng) {
    size_t d = x.shape()[1];
    size_t dh = d / p.n_heads;
    Var h = p.ln.apply(x);
    Var q = p.wq.apply(h);
    Var k = p.wk.apply(h);
    Var v = p.wv.apply(h);
    std::vector<Var> heads;
    heads.reserve(p.n_heads);
    double scale = 1.0 / std::sqrt(double(dh));
    for (size_t hi = 0; hi < p.n_heads; ++hi) {
        Var qh = slice(q, 1, hi * dh, dh);
        Var kh = slice(k, 1, hi * dh, dh);
        Var vh = slice(v, 1, hi * dh, dh);
        Var scores = mul_scalar(matmul(qh, transpose(kh)), scale);
        Var attn = softmax(scores, 1);
        heads.push_back(matmul(attn, vh));
    }
    Var out = p.wo.apply(concat(heads, 1));
    return add(x, dropout(out, dropout_rate, training, rng));
}

void SwgBlockConfig::validate() const {
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
        throw std::invalid_argument("block config: d_model must be divisible by n_heads");
    if (k >= d_model)
        throw std::invalid_argument("block config: k=" + std::to_string(k) +
                                    " must be < n = d_model = " + std::to_string(d_model));
    size_t ff = 0, mhsa_n = 0, swg_n = 0;
    for (const auto& m : module_order) {
        if (m == "ff") ++ff;
        else if (m == "mhsa") ++mhsa_n;
        else if (m == "swg") ++swg_n;
        else throw std::invalid_argument("block config: unknown module '" + m + "'");
    }
    if (ff != 2 || mhsa_n != 1 || swg_n != 1)
        throw std::invalid_argument(
            "block config: module_order must contain exactly two ff, one mhsa, one swg");
}

void SwgBlockParams::init(const SwgBlockConfig& cfg, Rng& rng) {
    cfg.validate();
    ff1.init(cfg.d_model, cfg.ff_ratio, rng);
    ff2.init(cfg.d_model, cfg.ff_ratio, rng);
    mhsa.init(cfg.d_model, cfg.n_heads, rng);
    swg_ln.init(cfg.d_model);
    swg.init(cfg.t, cfg.k, cfg.graph_ffn_ratio, cfg.aggregator, rng);
    final_ln.init(cfg.d_model);
}

std::vector<Var> SwgBlockParams::parameters() {
    std::vector<Var> out;
    auto append = [&out](std::vector<Var> v) {
        out.insert(out.end(), v.begin(), v.end());
    };
    append(ff1.parameters());
    append(mhsa.parameters());
    out.push_back(swg_ln.gamma);
    out.push_back(swg_ln.beta);
    append(swg.parameters());
    append(ff2.parameters());
    out.push_back(final_ln.gamma);
    out.push_back(final_ln.beta);
    return out;
}

Var swg_former_block_forward(const Var& x, const SwgBlockConfig& cfg, SwgBlockParams& p,
                             bool training, Rng& rng) {
    const auto& xs = x.shape();
    if (xs.size() != 3 || xs[1] * xs[2] != cfg.d_model)
        throw std::invalid_argument("block: input " + x.value().shape_str() +
                                    " does not match d_model " + std::to_string(cfg.d_model));
    size_t T = xs[0], F = xs[1], C = xs[2];
    if (T % cfg.t != 0)
        throw std::invalid_argument("block: window t=" + std::to_string(cfg.t) +
                                    " does not divide T=" + std::to_string(T));
    Var seq = reshape(x, {T, cfg.d_model});
    size_t ff_seen = 0;
    for (const auto& m : cfg.module_order) {
        if (m == "ff") {
            FfParams& ff = (ff_seen++ == 0) ? p.ff1 : p.ff2;
            seq = ff_forward(seq, ff, cfg.dropout_rate, training, rng);
        } else if (m == "mhsa") {
            seq = mhsa_forward(seq, p.mhsa, cfg.dropout_rate, training, rng);
        } else {
            // same residual wrapper as the other modules, F-C vertex domain inside
            Var inner = reshape(p.swg_ln.apply(seq), {T, F, C});
            Var g = swg_module_forward(inner, cfg.t, cfg.k, p.swg, training);
            seq = add(seq, dropout(reshape(g, {T, cfg.d_model}), cfg.dropout_rate, training, rng));
        }
    }
    return reshape(p.final_ln.apply(seq), {T, F, C});
}

void ConvBn::init(size_t cin, size_t cout, size_t ksize, Rng& rng) {
    Tensor k({cout, cin, ksize, ksize});
    double s = std::sqrt(2.0 / double(cin * ksize * ksize));
    for (size_t i = 0; i < k.numel(); ++i) k[i] = rng.normal(0.0, s);
    kernel = make_parameter(std::move(k));
    bn_gamma = make_parameter(Tensor::ones({cout}));
    bn_beta = make_parameter(Tensor::zeros({cout}));
    bn_stats = BatchNormStats{};
    pad = ksize / 2;
}

Var ConvBn::apply(const Var& x, bool training) {
    Var c = conv2d(x, kernel, 1, 1, pad, pad);
    return batch_norm(c, bn_gamma, bn_beta, 1, bn_stats, training);
}

void MsConvParams::init(size_t cin_, size_t cout_, Rng& rng) {
    cin = cin_;
    cout = cout_;
    c3a.init(cin, cout, 3, rng);
    c3b.init(cout, cout, 3, rng);
    c5a.init(cin, cout, 5, rng);
    c5b.init(cout, cout, 5, rng);
    if (cin != cout) {
        Tensor k({cout, cin, 1, 1});
        double s = std::sqrt(2.0 / double(cin));
        for (size_t i = 0; i < k.numel(); ++i) k[i] = rng.normal(0.0, s);
        proj = make_parameter(std::move(k));
    } else {
        proj = Var();
    }
    w1 = make_parameter(Tensor::ones({1}));
    w2 = make_parameter(Tensor::ones({1}));
    w3 = make_parameter(Tensor::ones({1}));
}

std::vector<Var> MsConvParams::parameters() {
    std::vector<Var> out{c3a.kernel, c3a.bn_gamma, c3a.bn_beta, c3b.kernel, c3b.bn_gamma,
                         c3b.bn_beta, c5a.kernel, c5a.bn_gamma, c5a.bn_beta, c5b.kernel,
                         c5b.bn_gamma, c5b.bn_beta, w1, w2, w3};
    if (proj.defined()) out.push_back(proj);
    return out;
}

Var ms_conv_forward(const Var& x, MsConvParams& p, double dropout_rate, bool training, Rng& rng) {
    const auto& xs = x.shape();
    if (xs.size() != 4 || xs[1] != p.cin)
        throw std::invalid_argument("ms_conv: input " + x.value().shape_str() + " expected " +
                                    std::to_string(p.cin) + " channels");
    if (xs[3] % 2 != 0)
        throw std::invalid_argument("ms_conv: frequency extent must be even, got " +
                                    std::to_string(xs[3]));
    Var x3 = p.c3b.apply(swish(p.c3a.apply(x, training)), training);
    Var x5 = p.c5b.apply(swish(p.c5a.apply(x, training)), training);
    Var res = p.proj.defined() ? conv2d(x, p.proj) : x;
    Var fused = add(add(mul(x3, p.w1), mul(x5, p.w2)), mul(res, p.w3));
    return dropout(max_pool2d(fused, 1, 2), dropout_rate, training, rng);
}

Tensor sinusoidal_positions(size_t T, size_t d) {
    Tensor pe({T, d});
    for (size_t t = 0; t < T; ++t)
        for (size_t i = 0; i < d; ++i) {
            double angle = double(t) / std::pow(10000.0, 2.0 * double(i / 2) / double(d));
            pe.at({t, i}) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

}  // namespace swg
