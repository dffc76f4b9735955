#include <cstdio>
#include <functional>

#include "swg/gradcheck.hpp"
#include "swg/model.hpp"

namespace swg {

namespace {

Tensor randn(std::vector<size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, scale);
    return t;
}

struct SuiteRunner {
    bool verbose;
    std::vector<std::string> failures;

    void run(const std::string& name, double tol, const std::function<Var()>& make_loss,
             std::vector<Var> params) {
        GradCheckResult r = grad_check(make_loss, std::move(params));
        if (verbose)
            std::printf("  %-28s rel %.3e abs %.3e %s\n", name.c_str(), r.max_rel_err,
                        r.max_abs_err, r.passed(tol) ? "ok" : "FAIL");
        if (!r.passed(tol))
            failures.push_back(name + ": max rel err " + std::to_string(r.max_rel_err) +
                               " at " + r.worst);
    }
};

void op_suites(SuiteRunner& s) {
    Rng rng(101);
    const double tol = 1e-4;

    {
        Var a(randn({3, 4}, rng), true), b(randn({4}, rng), true);
        s.run("broadcast add/mul/div", tol,
              [&] { return mean_all(square(div(mul(add(a, b), b), add_scalar(square(b), 2.0)))); },
              {a, b});
    }
    {
        Var a(randn({3, 4}, rng), true), b(randn({4, 5}, rng), true);
        s.run("matmul", tol, [&] { return mean_all(square(matmul(a, b))); }, {a, b});
    }
    {
        Var x(randn({2, 3, 6, 6}, rng), true), k(randn({4, 3, 3, 3}, rng, 0.5), true);
        s.run("conv2d pad1", tol, [&] { return mean_all(square(conv2d(x, k, 1, 1, 1, 1))); },
              {x, k});
    }
    {
        Var x(randn({1, 2, 4, 6}, rng), true);
        s.run("max_pool2d", tol, [&] { return mean_all(square(max_pool2d(x, 2, 2))); }, {x});
    }
    {
        Var x(randn({3, 7}, rng), true);
        s.run("softmax", tol, [&] { return mean_all(square(softmax(x, 1))); }, {x});
    }
    {
        Var x(randn({4, 6}, rng), true);
        Var g(Tensor::ones({6}), true), b(randn({6}, rng, 0.1), true);
        s.run("layer_norm", tol, [&] { return mean_all(square(layer_norm(x, g, b))); },
              {x, g, b});
    }
    {
        Var x(randn({2, 3, 5}, rng), true);
        Var g(Tensor::ones({3}), true), b(randn({3}, rng, 0.1), true);
        BatchNormStats st;
        s.run("batch_norm train", tol,
              [&] {
                  st = BatchNormStats{};
                  return mean_all(square(batch_norm(x, g, b, 1, st, true)));
              },
              {x, g, b});
    }
    {
        Var x(randn({3, 5}, rng), true);
        s.run("gelu/swish/tanh/sigmoid", tol,
              [&] {
                  return mean_all(square(
                      add(add(gelu(x), swish(x)), add(tanh_op(x), sigmoid_op(x)))));
              },
              {x});
    }
    {
        Var x(randn({4, 8}, rng), true);
        s.run("dropout (fixed mask)", tol,
              [&] {
                  Rng mask_rng(7);  // same mask on every evaluation
                  return mean_all(square(dropout(x, 0.3, true, mask_rng)));
              },
              {x});
    }
    {
        Var x(randn({2, 3, 4}, rng), true);
        s.run("reductions", tol,
              [&] {
                  Var a = sum_axes(x, {1}, false);
                  Var b = mean_axes(x, {0, 2}, false);
                  return add(mean_all(square(a)), mean_all(square(b)));
              },
              {x});
    }
    {
        Var x(randn({2, 3, 4}, rng), true);
        s.run("reduce_max", tol, [&] { return mean_all(square(reduce_max(x, 1))); }, {x});
    }
    {
        Var x(randn({2, 12}, rng), true), y(randn({2, 5}, rng), true);
        s.run("shape ops", tol,
              [&] {
                  Var r = permute(reshape(x, {2, 3, 4}), {2, 0, 1});
                  Var c = concat({reshape(r, {2, 12}), y}, 1);
                  Var sl = slice(c, 1, 2, 6);
                  Var idx = index_select0(sl, {1, 0, 1});
                  return mean_all(square(idx));
              },
              {x, y});
    }
    {
        Var x(randn({5, 4}, rng), true), w(randn({4, 3}, rng), true), b(randn({3}, rng), true);
        Tensor tgt = randn({5, 3}, rng);
        s.run("linear+mse", tol, [&] { return mse(linear(x, w, b), Var(tgt)); }, {x, w, b});
    }
}

void block_suites(SuiteRunner& s) {
    Rng rng(202);
    const double tol = 1e-4;

    {
        size_t t = 5;
        TransformFfnParams p;
        p.w1 = make_parameter(randn({t, 2 * t}, rng, 0.3));
        p.w2 = make_parameter(randn({2 * t, t}, rng, 0.3));
        Var g(randn({6, t}, rng), true);
        s.run("transform_ffn", tol, [&] { return mean_all(square(transform_ffn(g, p))); },
              {p.w1, p.w2, g});
    }
    {
        size_t t = 4;
        VertexUpdateParams p;
        p.weight = make_parameter(randn({2 * t, t}, rng, 0.3));
        p.bias = make_parameter(randn({t}, rng, 0.1));
        p.bn_gamma = make_parameter(Tensor::ones({t}));
        p.bn_beta = make_parameter(Tensor::zeros({t}));
        Var h(randn({6, t}, rng), true), g(randn({6, t}, rng), true);
        s.run("vertex_update", tol,
              [&] {
                  p.bn_stats = BatchNormStats{};
                  return mean_all(square(vertex_update(h, g, p, true)));
              },
              {p.weight, p.bias, p.bn_gamma, p.bn_beta, h, g});
    }
    for (AggregatorKind kind :
         {AggregatorKind::conv2d_agg, AggregatorKind::max_relative, AggregatorKind::sage_mean,
          AggregatorKind::gin_sum}) {
        size_t t = 5, k = 4;
        SwgModuleParams p;
        p.init(t, k, 2, kind, rng);
        if (kind == AggregatorKind::conv2d_agg)
            for (size_t i = 0; i < k; ++i) p.agg_weights.value_mut()[i] += 0.01 * double(i);
        Var x(randn({10, 4, 3}, rng), true);
        auto params = p.parameters();
        params.push_back(x);
        s.run("swg_module " + to_string(kind), tol,
              [&] {
                  p.update.bn_stats = BatchNormStats{};
                  return mean_all(square(swg_module_forward(x, t, k, p, true)));
              },
              params);
    }
    {
        size_t d = 8;
        FfParams p;
        p.init(d, 2, rng);
        Var x(randn({4, d}, rng), true);
        auto params = p.parameters();
        params.push_back(x);
        Rng drop(0);
        s.run("ff block", tol, [&] { return mean_all(square(ff_forward(x, p, 0.0, true, drop))); },
              params);
    }
    {
        size_t d = 8;
        MhsaParams p;
        p.init(d, 2, rng);
        Var x(randn({5, d}, rng), true);
        auto params = p.parameters();
        params.push_back(x);
        Rng drop(0);
        s.run("mhsa block", tol,
              [&] { return mean_all(square(mhsa_forward(x, p, 0.0, true, drop))); }, params);
    }
    {
        SwgBlockConfig cfg;
        cfg.t = 5;
        cfg.k = 4;
        cfg.d_model = 24;
        cfg.n_heads = 4;
        cfg.ff_ratio = 2;
        cfg.graph_ffn_ratio = 2;
        cfg.dropout_rate = 0.0;
        SwgBlockParams p;
        p.init(cfg, rng);
        for (size_t i = 0; i < cfg.k; ++i) p.swg.agg_weights.value_mut()[i] += 0.01 * double(i);
        Var x(randn({10, 4, 6}, rng), true);
        auto params = p.parameters();
        params.push_back(x);
        Rng drop(0);
        s.run("full swg-former block", tol,
              [&] {
                  p.swg.update.bn_stats = BatchNormStats{};
                  return mean_all(square(swg_former_block_forward(x, cfg, p, true, drop)));
              },
              params);
    }
    {
        MsConvParams p;
        p.init(2, 3, rng);
        Var x(randn({1, 2, 4, 6}, rng), true);
        auto params = p.parameters();
        params.push_back(x);
        Rng drop(0);
        s.run("ms_conv block", tol,
              [&] {
                  p.c3a.bn_stats = BatchNormStats{};
                  p.c3b.bn_stats = BatchNormStats{};
                  p.c5a.bn_stats = BatchNormStats{};
                  p.c5b.bn_stats = BatchNormStats{};
                  return mean_all(square(ms_conv_forward(x, p, 0.0, true, drop)));
              },
              params);
    }
}

void model_suite(SuiteRunner& s) {
    // Reduced whole model: 50 frames, 16 mel bands, 7 channels, one MS-Conv
    // stage, two blocks, d_model 32. Checking every one of its ~50k weights
    // by finite differences is hours of work, so the FD sweep covers a
    // representative tensor from every module type; reverse-mode correctness
    // of the underlying ops is established by the per-op suites above.
    ModelConfig cfg;
    cfg.input_frames = 50;
    cfg.n_mels = 16;
    cfg.in_channels = 7;
    cfg.n_msconv = 1;
    cfg.msconv_channels = {4};  // d_model = 8*4 = 32
    cfg.n_blocks = 2;
    cfg.window_group = {5, 25};
    cfg.k = 8;
    cfg.n_heads = 4;
    cfg.ff_ratio = 2;
    cfg.graph_ffn_ratio = 2;
    cfg.dropout_rate = 0.0;
    cfg.n_classes = 3;
    cfg.label_frames_per_clip = 10;

    Rng rng(303);
    ModelParams p;
    p.init(cfg, rng);
    for (auto& b : p.blocks)
        for (size_t i = 0; i < cfg.k; ++i) b.swg.agg_weights.value_mut()[i] += 0.01 * double(i);
    Tensor feats = randn({cfg.input_frames, cfg.n_mels, cfg.in_channels}, rng);
    Tensor target = Tensor::zeros({cfg.label_frames_per_clip, cfg.n_classes, 3});
    Rng trg(1);
    for (size_t f = 0; f < cfg.label_frames_per_clip; ++f) {
        double u[3];
        direction_vector(trg.uniform(-180.0, 180.0), trg.uniform(-90.0, 90.0), u);
        size_t c = trg.index(cfg.n_classes);
        for (size_t ax = 0; ax < 3; ++ax) target.at({f, c, ax}) = u[ax];
    }

    std::vector<Var> subset = {
        p.msconv[0].c3a.kernel,   p.msconv[0].c5a.bn_gamma, p.msconv[0].w1,
        p.msconv[0].w3,           p.blocks[0].ff1.l1.b,     p.blocks[0].mhsa.wq.b,
        p.blocks[0].swg.agg_weights, p.blocks[0].swg.agg_bias, p.blocks[0].swg.update.bias,
        p.blocks[0].final_ln.gamma,  p.blocks[1].ff2.l2.b,  p.blocks[1].swg.agg_weights,
        p.blocks[1].mhsa.ln.beta,    p.fc1.b,               p.fc2.b,
    };
    Rng drop(0);
    auto reset = [&] {
        p.msconv[0].c3a.bn_stats = BatchNormStats{};
        p.msconv[0].c3b.bn_stats = BatchNormStats{};
        p.msconv[0].c5a.bn_stats = BatchNormStats{};
        p.msconv[0].c5b.bn_stats = BatchNormStats{};
        for (auto& b : p.blocks) b.swg.update.bn_stats = BatchNormStats{};
    };
    s.run("reduced whole model", 1e-3,
          [&] {
              reset();
              return accdoa_loss(model_forward(Var(feats), cfg, p, true, drop), target);
          },
          subset);
}

}  // namespace

std::vector<std::string> run_gradient_suites(bool include_model, bool verbose) {
    SuiteRunner s{verbose, {}};
    op_suites(s);
    block_suites(s);
    if (include_model) model_suite(s);
    return s.failures;
}

}  // namespace swg
