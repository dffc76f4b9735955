#include "swg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace swg {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

struct BcastPlan {
    std::vector<size_t> out_shape;
    std::vector<size_t> a_strides;  // 0 on broadcast axes
    std::vector<size_t> b_strides;
};

BcastPlan broadcast_plan(const std::vector<size_t>& a, const std::vector<size_t>& b) {
    size_t rank = std::max(a.size(), b.size());
    BcastPlan plan;
    plan.out_shape.resize(rank);
    std::vector<size_t> ae(rank, 1), be(rank, 1);
    for (size_t i = 0; i < a.size(); ++i) ae[rank - a.size() + i] = a[i];
    for (size_t i = 0; i < b.size(); ++i) be[rank - b.size() + i] = b[i];
    for (size_t i = 0; i < rank; ++i) {
        if (ae[i] != be[i] && ae[i] != 1 && be[i] != 1)
            throw std::invalid_argument("broadcast: incompatible shapes " + Tensor::shape_str(a) +
                                        " vs " + Tensor::shape_str(b));
        plan.out_shape[i] = std::max(ae[i], be[i]);
    }
    auto strides_of = [&](const std::vector<size_t>& ext) {
        std::vector<size_t> s(rank, 0);
        size_t acc = 1;
        for (size_t i = rank; i-- > 0;) {
            s[i] = (ext[i] == 1) ? 0 : acc;
            acc *= ext[i];
        }
        return s;
    };
    plan.a_strides = strides_of(ae);
    plan.b_strides = strides_of(be);
    return plan;
}

// Walks the broadcast output space calling fn(out_idx, a_idx, b_idx).
template <typename Fn>
void bcast_for_each(const BcastPlan& p, Fn&& fn) {
    size_t n = shape_numel(p.out_shape);
    size_t rank = p.out_shape.size();
    for (size_t i = 0; i < n; ++i) {
        size_t rem = i, ao = 0, bo = 0;
        for (size_t d = rank; d-- > 0;) {
            size_t c = rem % p.out_shape[d];
            rem /= p.out_shape[d];
            ao += c * p.a_strides[d];
            bo += c * p.b_strides[d];
        }
        fn(i, ao, bo);
    }
}

// dfa/dfb give d(out)/d(a), d(out)/d(b) at each element.
template <typename F, typename Dfa, typename Dfb>
Var binary_op(const Var& a, const Var& b, F f, Dfa dfa, Dfb dfb) {
    BcastPlan plan = broadcast_plan(a.shape(), b.shape());
    Tensor out(plan.out_shape);
    const double* av = a.value().data();
    const double* bv = b.value().data();
    bcast_for_each(plan, [&](size_t i, size_t ao, size_t bo) { out[i] = f(av[ao], bv[bo]); });
    Var va = a, vb = b;
    return Var::make(std::move(out), {a, b}, [va, vb, plan, dfa, dfb](Var::Node& n) mutable {
        const double* g = n.grad.data();
        const double* av2 = va.value().data();
        const double* bv2 = vb.value().data();
        double* ga = va.requires_grad() ? va.grad().data() : nullptr;
        double* gb = vb.requires_grad() ? vb.grad().data() : nullptr;
        bcast_for_each(plan, [&](size_t i, size_t ao, size_t bo) {
            if (ga) ga[ao] += g[i] * dfa(av2[ao], bv2[bo]);
            if (gb) gb[bo] += g[i] * dfb(av2[ao], bv2[bo]);
        });
    });
}

template <typename F, typename Df>
Var unary_op(const Var& x, F f, Df df) {
    Tensor out(x.shape());
    const double* xv = x.value().data();
    for (size_t i = 0; i < out.numel(); ++i) out[i] = f(xv[i]);
    Var vx = x;
    return Var::make(std::move(out), {x}, [vx, df](Var::Node& n) mutable {
        const double* g = n.grad.data();
        const double* xv2 = vx.value().data();
        double* gx = vx.grad().data();
        for (size_t i = 0; i < n.value.numel(); ++i) gx[i] += g[i] * df(xv2[i]);
    });
}

void axis_split(const std::vector<size_t>& shape, size_t axis, size_t& outer, size_t& mid,
                size_t& inner) {
    if (axis >= shape.size())
        throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for " +
                                    Tensor::shape_str(shape));
    outer = 1;
    for (size_t i = 0; i < axis; ++i) outer *= shape[i];
    mid = shape[axis];
    inner = 1;
    for (size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

}  // namespace

Var add(const Var& a, const Var& b) {
    return binary_op(
        a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
    return binary_op(
        a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
    return binary_op(
        a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
    return binary_op(
        a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Var add_scalar(const Var& a, double c) {
    return unary_op(
        a, [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Var mul_scalar(const Var& a, double c) {
    return unary_op(
        a, [c](double x) { return x * c; }, [c](double) { return c; });
}

Var gelu(const Var& x) {
    return unary_op(
        x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
        [](double v) {
            return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
                   v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
        });
}

Var swish(const Var& x) {
    return unary_op(
        x,
        [](double v) {
            double s = 1.0 / (1.0 + std::exp(-v));
            return v * s;
        },
        [](double v) {
            double s = 1.0 / (1.0 + std::exp(-v));
            return s + v * s * (1.0 - s);
        });
}

Var tanh_op(const Var& x) {
    return unary_op(
        x, [](double v) { return std::tanh(v); },
        [](double v) {
            double t = std::tanh(v);
            return 1.0 - t * t;
        });
}

Var sigmoid_op(const Var& x) {
    return unary_op(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double v) {
            double s = 1.0 / (1.0 + std::exp(-v));
            return s * (1.0 - s);
        });
}

Var sqrt_op(const Var& x) {
    return unary_op(
        x, [](double v) { return std::sqrt(v); },
        [](double v) { return 0.5 / std::sqrt(v); });
}

Var square(const Var& x) {
    return unary_op(
        x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var activation(const Var& x, Activation kind) {
    switch (kind) {
        case Activation::gelu: return gelu(x);
        case Activation::swish: return swish(x);
        case Activation::tanh: return tanh_op(x);
        case Activation::sigmoid: return sigmoid_op(x);
    }
    throw std::invalid_argument("unknown activation kind");
}

Var matmul(const Var& a, const Var& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 2 || bs.size() != 2)
        throw std::invalid_argument("matmul: expected rank-2 inputs, got " +
                                    a.value().shape_str() + " and " + b.value().shape_str());
    if (as[1] != bs[0])
        throw std::invalid_argument("matmul: inner extents differ, " + a.value().shape_str() +
                                    " * " + b.value().shape_str());
    size_t m = as[0], p = as[1], q = bs[1];
    Tensor out({m, q});
    const double* av = a.value().data();
    const double* bv = b.value().data();
    double* ov = out.data();
#ifdef _OPENMP
#pragma omp parallel for if (m * p * q > 65536)
#endif
    for (long long i = 0; i < (long long)m; ++i) {
        double* orow = ov + i * q;
        for (size_t k = 0; k < p; ++k) {
            double aik = av[i * p + k];
            const double* brow = bv + k * q;
            for (size_t j = 0; j < q; ++j) orow[j] += aik * brow[j];
        }
    }
    Var va = a, vb = b;
    return Var::make(std::move(out), {a, b}, [va, vb, m, p, q](Var::Node& n) mutable {
        const double* g = n.grad.data();
        const double* av2 = va.value().data();
        const double* bv2 = vb.value().data();
        if (va.requires_grad()) {
            double* ga = va.grad().data();  // ga += g * b^T
#ifdef _OPENMP
#pragma omp parallel for if (m * p * q > 65536)
#endif
            for (long long i = 0; i < (long long)m; ++i)
                for (size_t j = 0; j < q; ++j) {
                    double gij = g[i * q + j];
                    for (size_t k = 0; k < p; ++k) ga[i * p + k] += gij * bv2[k * q + j];
                }
        }
        if (vb.requires_grad()) {
            double* gb = vb.grad().data();  // gb += a^T * g
#ifdef _OPENMP
#pragma omp parallel for if (m * p * q > 65536)
#endif
            for (long long k = 0; k < (long long)p; ++k)
                for (size_t i = 0; i < m; ++i) {
                    double aik = av2[i * p + k];
                    for (size_t j = 0; j < q; ++j) gb[k * q + j] += aik * g[i * q + j];
                }
        }
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    return add(matmul(x, w), b);
}

Var conv2d(const Var& x, const Var& kernel, size_t stride_h, size_t stride_w, size_t pad_h,
           size_t pad_w) {
    const auto& xs = x.shape();
    const auto& ks = kernel.shape();
    if (xs.size() != 4 || ks.size() != 4)
        throw std::invalid_argument("conv2d: expected rank-4 input and kernel, got " +
                                    x.value().shape_str() + " and " + kernel.value().shape_str());
    size_t B = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
    size_t Cout = ks[0], kh = ks[2], kw = ks[3];
    if (ks[1] != Cin)
        throw std::invalid_argument("conv2d: kernel channel count " + std::to_string(ks[1]) +
                                    " does not match input channels " + std::to_string(Cin));
    if (H + 2 * pad_h < kh || W + 2 * pad_w < kw)
        throw std::invalid_argument("conv2d: kernel " + kernel.value().shape_str() +
                                    " does not fit padded input " + x.value().shape_str());
    if ((H + 2 * pad_h - kh) % stride_h != 0 || (W + 2 * pad_w - kw) % stride_w != 0)
        throw std::invalid_argument("conv2d: non-integer output extent for input " +
                                    x.value().shape_str());
    size_t Ho = (H + 2 * pad_h - kh) / stride_h + 1;
    size_t Wo = (W + 2 * pad_w - kw) / stride_w + 1;

    Tensor out({B, Cout, Ho, Wo});
    const double* xv = x.value().data();
    const double* kv = kernel.value().data();
    double* ov = out.data();
#ifdef _OPENMP
#pragma omp parallel for collapse(2)
#endif
    for (long long b = 0; b < (long long)B; ++b)
        for (long long co = 0; co < (long long)Cout; ++co) {
            for (size_t oh = 0; oh < Ho; ++oh)
                for (size_t ow = 0; ow < Wo; ++ow) {
                    double acc = 0.0;
                    for (size_t ci = 0; ci < Cin; ++ci) {
                        const double* xc = xv + ((b * Cin + ci) * H) * W;
                        const double* kc = kv + ((co * Cin + ci) * kh) * kw;
                        for (size_t r = 0; r < kh; ++r) {
                            long long ih = (long long)(oh * stride_h + r) - (long long)pad_h;
                            if (ih < 0 || ih >= (long long)H) continue;
                            for (size_t c = 0; c < kw; ++c) {
                                long long iw = (long long)(ow * stride_w + c) - (long long)pad_w;
                                if (iw < 0 || iw >= (long long)W) continue;
                                acc += xc[ih * W + iw] * kc[r * kw + c];
                            }
                        }
                    }
                    ov[((b * Cout + co) * Ho + oh) * Wo + ow] = acc;
                }
        }

    Var vx = x, vk = kernel;
    auto back = [vx, vk, B, Cin, Cout, H, W, Ho, Wo, kh, kw, stride_h, stride_w, pad_h,
                 pad_w](Var::Node& n) mutable {
        const double* g = n.grad.data();
        const double* xv2 = vx.value().data();
        const double* kv2 = vk.value().data();
        if (vk.requires_grad()) {
            double* gk = vk.grad().data();
#ifdef _OPENMP
#pragma omp parallel for
#endif
            for (long long co = 0; co < (long long)Cout; ++co)
                for (size_t ci = 0; ci < Cin; ++ci)
                    for (size_t r = 0; r < kh; ++r)
                        for (size_t c = 0; c < kw; ++c) {
                            double acc = 0.0;
                            for (size_t b = 0; b < B; ++b)
                                for (size_t oh = 0; oh < Ho; ++oh) {
                                    long long ih = (long long)(oh * stride_h + r) - (long long)pad_h;
                                    if (ih < 0 || ih >= (long long)H) continue;
                                    for (size_t ow = 0; ow < Wo; ++ow) {
                                        long long iw =
                                            (long long)(ow * stride_w + c) - (long long)pad_w;
                                        if (iw < 0 || iw >= (long long)W) continue;
                                        acc += g[((b * Cout + co) * Ho + oh) * Wo + ow] *
                                               xv2[((b * Cin + ci) * H + ih) * W + iw];
                                    }
                                }
                            gk[((co * Cin + ci) * kh + r) * kw + c] += acc;
                        }
        }
        if (vx.requires_grad()) {
            double* gx = vx.grad().data();
#ifdef _OPENMP
#pragma omp parallel for
#endif
            for (long long b = 0; b < (long long)B; ++b)
                for (size_t co = 0; co < Cout; ++co)
                    for (size_t oh = 0; oh < Ho; ++oh)
                        for (size_t ow = 0; ow < Wo; ++ow) {
                            double gv = g[((b * Cout + co) * Ho + oh) * Wo + ow];
                            if (gv == 0.0) continue;
                            for (size_t ci = 0; ci < Cin; ++ci)
                                for (size_t r = 0; r < kh; ++r) {
                                    long long ih =
                                        (long long)(oh * stride_h + r) - (long long)pad_h;
                                    if (ih < 0 || ih >= (long long)H) continue;
                                    for (size_t c = 0; c < kw; ++c) {
                                        long long iw =
                                            (long long)(ow * stride_w + c) - (long long)pad_w;
                                        if (iw < 0 || iw >= (long long)W) continue;
                                        gx[((b * Cin + ci) * H + ih) * W + iw] +=
                                            gv * kv2[((co * Cin + ci) * kh + r) * kw + c];
                                    }
                                }
                        }
        }
    };
    return Var::make(std::move(out), {x, kernel}, std::move(back));
}

Var max_pool2d(const Var& x, size_t ph, size_t pw) {
    const auto& xs = x.shape();
    if (xs.size() != 4)
        throw std::invalid_argument("max_pool2d: expected rank-4 input, got " +
                                    x.value().shape_str());
    size_t B = xs[0], C = xs[1], H = xs[2], W = xs[3];
    if (ph == 0 || pw == 0 || H % ph != 0 || W % pw != 0)
        throw std::invalid_argument("max_pool2d: window (" + std::to_string(ph) + "," +
                                    std::to_string(pw) + ") does not divide input " +
                                    x.value().shape_str());
    size_t Ho = H / ph, Wo = W / pw;
    Tensor out({B, C, Ho, Wo});
    auto argmax = std::make_shared<std::vector<size_t>>(out.numel());
    const double* xv = x.value().data();
    for (size_t bc = 0; bc < B * C; ++bc) {
        const double* plane = xv + bc * H * W;
        for (size_t oh = 0; oh < Ho; ++oh)
            for (size_t ow = 0; ow < Wo; ++ow) {
                size_t best = oh * ph * W + ow * pw;
                double bv = plane[best];
                for (size_t r = 0; r < ph; ++r)
                    for (size_t c = 0; c < pw; ++c) {
                        size_t idx = (oh * ph + r) * W + ow * pw + c;
                        if (plane[idx] > bv) {  // strict: ties keep first occurrence
                            bv = plane[idx];
                            best = idx;
                        }
                    }
                size_t o = (bc * Ho + oh) * Wo + ow;
                out[o] = bv;
                (*argmax)[o] = bc * H * W + best;
            }
    }
    Var vx = x;
    return Var::make(std::move(out), {x}, [vx, argmax](Var::Node& n) mutable {
        const double* g = n.grad.data();
        double* gx = vx.grad().data();
        for (size_t i = 0; i < n.value.numel(); ++i) gx[(*argmax)[i]] += g[i];
    });
}

Var softmax(const Var& x, size_t axis) {
    size_t outer, mid, inner;
    axis_split(x.shape(), axis, outer, mid, inner);
    Tensor out(x.shape());
    const double* xv = x.value().data();
    for (size_t o = 0; o < outer; ++o)
        for (size_t in = 0; in < inner; ++in) {
            double mx = -1e300;
            for (size_t k = 0; k < mid; ++k) mx = std::max(mx, xv[(o * mid + k) * inner + in]);
            double sum = 0.0;
            for (size_t k = 0; k < mid; ++k) {
                size_t idx = (o * mid + k) * inner + in;
                out[idx] = std::exp(xv[idx] - mx);
                sum += out[idx];
            }
            for (size_t k = 0; k < mid; ++k) out[(o * mid + k) * inner + in] /= sum;
        }
    Var vx = x;
    return Var::make(std::move(out), {x}, [vx, outer, mid, inner](Var::Node& n) mutable {
        const double* g = n.grad.data();
        const double* y = n.value.data();
        double* gx = vx.grad().data();
        for (size_t o = 0; o < outer; ++o)
            for (size_t in = 0; in < inner; ++in) {
                double dot = 0.0;
                for (size_t k = 0; k < mid; ++k) {
                    size_t idx = (o * mid + k) * inner + in;
                    dot += g[idx] * y[idx];
                }
                for (size_t k = 0; k < mid; ++k) {
                    size_t idx = (o * mid + k) * inner + in;
                    gx[idx] += y[idx] * (g[idx] - dot);
                }
            }
    });
}

Var dropout(const Var& x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
    if (!training || rate == 0.0) return x;
    auto mask = std::make_shared<Tensor>(x.value().shape());
    double keep = 1.0 - rate;
    Tensor out(x.value().shape());
    const double* xv = x.value().data();
    for (size_t i = 0; i < out.numel(); ++i) {
        double m = (rng.uniform() < rate) ? 0.0 : 1.0 / keep;
        (*mask)[i] = m;
        out[i] = xv[i] * m;
    }
    Var vx = x;
    return Var::make(std::move(out), {x}, [vx, mask](Var::Node& n) mutable {
        const double* g = n.grad.data();
        double* gx = vx.grad().data();
        for (size_t i = 0; i < n.value.numel(); ++i) gx[i] += g[i] * (*mask)[i];
    });
}

Var sum_all(const Var& x) {
    double s = 0.0;
    for (size_t i = 0; i < x.numel(); ++i) s += x.value()[i];
    Var vx = x;
    return Var::make(Tensor::scalar(s), {x}, [vx](Var::Node& n) mutable {
        double g = n.grad[0];
        double* gx = vx.grad().data();
        for (size_t i = 0; i < vx.numel(); ++i) gx[i] += g;
    });
}

Var mean_all(const Var& x) {
    return mul_scalar(sum_all(x), 1.0 / double(x.numel()));
}

Var sum_axes(const Var& x, std::vector<size_t> axes, bool keepdim) {
    const auto& xs = x.shape();
    std::vector<bool> reduced(xs.size(), false);
    for (size_t a : axes) {
        if (a >= xs.size())
            throw std::invalid_argument("sum_axes: axis out of range for " + x.value().shape_str());
        reduced[a] = true;
    }
    std::vector<size_t> kept_shape(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) kept_shape[i] = reduced[i] ? 1 : xs[i];
    // strides of the kept shape, 0 where reduced
    std::vector<size_t> ostr(xs.size(), 0);
    size_t acc = 1;
    for (size_t i = xs.size(); i-- > 0;) {
        ostr[i] = reduced[i] ? 0 : acc;
        acc *= kept_shape[i];
    }
    Tensor out(kept_shape);
    const double* xv = x.value().data();
    size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) {
        size_t rem = i, oo = 0;
        for (size_t d = xs.size(); d-- > 0;) {
            size_t c = rem % xs[d];
            rem /= xs[d];
            oo += c * ostr[d];
        }
        out[oo] += xv[i];
    }
    Var vx = x;
    std::vector<size_t> xs_copy = xs;
    Var summed =
        Var::make(std::move(out), {x}, [vx, xs_copy, ostr](Var::Node& n) mutable {
            const double* g = n.grad.data();
            double* gx = vx.grad().data();
            size_t n_in = vx.numel();
            for (size_t i = 0; i < n_in; ++i) {
                size_t rem = i, oo = 0;
                for (size_t d = xs_copy.size(); d-- > 0;) {
                    size_t c = rem % xs_copy[d];
                    rem /= xs_copy[d];
                    oo += c * ostr[d];
                }
                gx[i] += g[oo];
            }
        });
    if (keepdim) return summed;
    std::vector<size_t> squeezed;
    for (size_t i = 0; i < xs.size(); ++i)
        if (!reduced[i]) squeezed.push_back(xs[i]);
    if (squeezed.empty()) squeezed.push_back(1);
    return reshape(summed, squeezed);
}

Var mean_axes(const Var& x, std::vector<size_t> axes, bool keepdim) {
    size_t n = 1;
    for (size_t a : axes) n *= x.shape().at(a);
    return mul_scalar(sum_axes(x, std::move(axes), keepdim), 1.0 / double(n));
}

Var reduce_max(const Var& x, size_t axis) {
    size_t outer, mid, inner;
    axis_split(x.shape(), axis, outer, mid, inner);
    std::vector<size_t> oshape;
    for (size_t i = 0; i < x.shape().size(); ++i)
        if (i != axis) oshape.push_back(x.shape()[i]);
    if (oshape.empty()) oshape.push_back(1);
    Tensor out(oshape);
    auto argmax = std::make_shared<std::vector<size_t>>(out.numel());
    const double* xv = x.value().data();
    for (size_t o = 0; o < outer; ++o)
        for (size_t in = 0; in < inner; ++in) {
            size_t best = (o * mid + 0) * inner + in;
            double bv = xv[best];
            for (size_t k = 1; k < mid; ++k) {
                size_t idx = (o * mid + k) * inner + in;
                if (xv[idx] > bv) {
                    bv = xv[idx];
                    best = idx;
                }
            }
            size_t oidx = o * inner + in;
            out[oidx] = bv;
            (*argmax)[oidx] = best;
        }
    Var vx = x;
    return Var::make(std::move(out), {x}, [vx, argmax](Var::Node& n) mutable {
        const double* g = n.grad.data();
        double* gx = vx.grad().data();
        for (size_t i = 0; i < n.value.numel(); ++i) gx[(*argmax)[i]] += g[i];
    });
}

Var reshape(const Var& x, std::vector<size_t> new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw std::invalid_argument("reshape: element count mismatch, " + x.value().shape_str() +
                                    " -> " + Tensor::shape_str(new_shape));
    Tensor out(new_shape, x.value().vec());
    Var vx = x;
    return Var::make(std::move(out), {x}, [vx](Var::Node& n) mutable {
        const double* g = n.grad.data();
        double* gx = vx.grad().data();
        for (size_t i = 0; i < n.value.numel(); ++i) gx[i] += g[i];
    });
}

Var permute(const Var& x, std::vector<size_t> perm) {
    const auto& xs = x.shape();
    if (perm.size() != xs.size())
        throw std::invalid_argument("permute: rank mismatch for " + x.value().shape_str());
    std::vector<size_t> oshape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) oshape[i] = xs.at(perm[i]);
    std::vector<size_t> xstr(xs.size());
    size_t acc = 1;
    for (size_t i = xs.size(); i-- > 0;) {
        xstr[i] = acc;
        acc *= xs[i];
    }
    // mapping: out linear index -> input linear index
    auto map = std::make_shared<std::vector<size_t>>(x.numel());
    Tensor out(oshape);
    const double* xv = x.value().data();
    size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) {
        size_t rem = i, src = 0;
        for (size_t d = oshape.size(); d-- > 0;) {
            size_t c = rem % oshape[d];
            rem /= oshape[d];
            src += c * xstr[perm[d]];
        }
        (*map)[i] = src;
        out[i] = xv[src];
    }
    Var vx = x;
    return Var::make(std::move(out), {x}, [vx, map](Var::Node& n) mutable {
        const double* g = n.grad.data();
        double* gx = vx.grad().data();
        for (size_t i = 0; i < n.value.numel(); ++i) gx[(*map)[i]] += g[i];
    });
}

Var concat(const std::vector<Var>& parts, size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const auto& s0 = parts[0].shape();
    size_t total_mid = 0;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        if (s.size() != s0.size())
            throw std::invalid_argument("concat: rank mismatch");
        for (size_t i = 0; i < s.size(); ++i)
            if (i != axis && s[i] != s0[i])
                throw std::invalid_argument("concat: shapes differ off-axis: " +
                                            parts[0].value().shape_str() + " vs " +
                                            p.value().shape_str());
        total_mid += s.at(axis);
    }
    std::vector<size_t> oshape = s0;
    oshape[axis] = total_mid;
    size_t outer, mid0, inner;
    axis_split(s0, axis, outer, mid0, inner);
    (void)mid0;
    Tensor out(oshape);
    size_t off = 0;
    for (const auto& p : parts) {
        size_t pm = p.shape()[axis];
        const double* pv = p.value().data();
        for (size_t o = 0; o < outer; ++o)
            std::memcpy(out.data() + (o * total_mid + off) * inner, pv + o * pm * inner,
                        pm * inner * sizeof(double));
        off += pm;
    }
    std::vector<Var> held = parts;
    return Var::make(std::move(out), parts,
                     [held, outer, inner, total_mid, axis](Var::Node& n) mutable {
                         const double* g = n.grad.data();
                         size_t off2 = 0;
                         for (auto& p : held) {
                             size_t pm = p.shape()[axis];
                             if (p.requires_grad()) {
                                 double* gp = p.grad().data();
                                 for (size_t o = 0; o < outer; ++o) {
                                     const double* src = g + (o * total_mid + off2) * inner;
                                     double* dst = gp + o * pm * inner;
                                     for (size_t i = 0; i < pm * inner; ++i) dst[i] += src[i];
                                 }
                             }
                             off2 += pm;
                         }
                     });
}

Var slice(const Var& x, size_t axis, size_t start, size_t len) {
    size_t outer, mid, inner;
    axis_split(x.shape(), axis, outer, mid, inner);
    if (start + len > mid)
        throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") exceeds extent " +
                                    std::to_string(mid));
    std::vector<size_t> oshape = x.shape();
    oshape[axis] = len;
    Tensor out(oshape);
    const double* xv = x.value().data();
    for (size_t o = 0; o < outer; ++o)
        std::memcpy(out.data() + o * len * inner, xv + (o * mid + start) * inner,
                    len * inner * sizeof(double));
    Var vx = x;
    return Var::make(std::move(out), {x}, [vx, outer, mid, inner, start, len](Var::Node& n) mutable {
        const double* g = n.grad.data();
        double* gx = vx.grad().data();
        for (size_t o = 0; o < outer; ++o) {
            double* dst = gx + (o * mid + start) * inner;
            const double* src = g + o * len * inner;
            for (size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
    });
}

Var index_select0(const Var& x, std::vector<size_t> indices) {
    const auto& xs = x.shape();
    if (xs.empty()) throw std::invalid_argument("index_select0: scalar input");
    size_t rows = xs[0];
    size_t rowsz = x.numel() / rows;
    for (size_t i : indices)
        if (i >= rows)
            throw std::invalid_argument("index_select0: index " + std::to_string(i) +
                                        " out of range " + std::to_string(rows));
    std::vector<size_t> oshape = xs;
    oshape[0] = indices.size();
    Tensor out(oshape);
    const double* xv = x.value().data();
    for (size_t r = 0; r < indices.size(); ++r)
        std::memcpy(out.data() + r * rowsz, xv + indices[r] * rowsz, rowsz * sizeof(double));
    Var vx = x;
    auto idx = std::make_shared<std::vector<size_t>>(std::move(indices));
    return Var::make(std::move(out), {x}, [vx, idx, rowsz](Var::Node& n) mutable {
        const double* g = n.grad.data();
        double* gx = vx.grad().data();
        for (size_t r = 0; r < idx->size(); ++r) {
            double* dst = gx + (*idx)[r] * rowsz;
            const double* src = g + r * rowsz;
            for (size_t i = 0; i < rowsz; ++i) dst[i] += src[i];
        }
    });
}

Var mse(const Var& pred, const Var& target) {
    if (pred.shape() != target.shape())
        throw std::invalid_argument("mse: shape mismatch " + pred.value().shape_str() + " vs " +
                                    target.value().shape_str());
    return mean_all(square(sub(pred, target)));
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, size_t norm_rank, double eps) {
    const auto& xs = x.shape();
    if (norm_rank == 0 || norm_rank > xs.size())
        throw std::invalid_argument("layer_norm: bad norm_rank for " + x.value().shape_str());
    size_t nsz = 1;
    for (size_t i = xs.size() - norm_rank; i < xs.size(); ++i) nsz *= xs[i];
    if (gamma.numel() != nsz || beta.numel() != nsz)
        throw std::invalid_argument("layer_norm: affine params must have " + std::to_string(nsz) +
                                    " elements");
    size_t rows = x.numel() / nsz;
    Tensor out(xs);
    auto xhat = std::make_shared<Tensor>(xs);
    auto invstd = std::make_shared<std::vector<double>>(rows);
    const double* xv = x.value().data();
    const double* gv = gamma.value().data();
    const double* bv = beta.value().data();
    for (size_t r = 0; r < rows; ++r) {
        const double* row = xv + r * nsz;
        double m = 0.0;
        for (size_t i = 0; i < nsz; ++i) m += row[i];
        m /= double(nsz);
        double v = 0.0;
        for (size_t i = 0; i < nsz; ++i) v += (row[i] - m) * (row[i] - m);
        v /= double(nsz);
        double is = 1.0 / std::sqrt(v + eps);
        (*invstd)[r] = is;
        for (size_t i = 0; i < nsz; ++i) {
            double xh = (row[i] - m) * is;
            (*xhat)[r * nsz + i] = xh;
            out[r * nsz + i] = gv[i] * xh + bv[i];
        }
    }
    Var vx = x, vg = gamma, vb = beta;
    return Var::make(std::move(out), {x, gamma, beta},
                     [vx, vg, vb, xhat, invstd, rows, nsz](Var::Node& n) mutable {
                         const double* g = n.grad.data();
                         const double* gv2 = vg.value().data();
                         double* gx = vx.requires_grad() ? vx.grad().data() : nullptr;
                         double* gg = vg.requires_grad() ? vg.grad().data() : nullptr;
                         double* gb = vb.requires_grad() ? vb.grad().data() : nullptr;
                         for (size_t r = 0; r < rows; ++r) {
                             const double* grow = g + r * nsz;
                             const double* xh = xhat->data() + r * nsz;
                             if (gg || gb)
                                 for (size_t i = 0; i < nsz; ++i) {
                                     if (gg) gg[i] += grow[i] * xh[i];
                                     if (gb) gb[i] += grow[i];
                                 }
                             if (gx) {
                                 double sum_dy = 0.0, sum_dyxh = 0.0;
                                 for (size_t i = 0; i < nsz; ++i) {
                                     double dxh = grow[i] * gv2[i];
                                     sum_dy += dxh;
                                     sum_dyxh += dxh * xh[i];
                                 }
                                 double is = (*invstd)[r];
                                 for (size_t i = 0; i < nsz; ++i) {
                                     double dxh = grow[i] * gv2[i];
                                     gx[r * nsz + i] +=
                                         is * (dxh - (sum_dy + xh[i] * sum_dyxh) / double(nsz));
                                 }
                             }
                         }
                     });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, size_t channel_axis,
               BatchNormStats& stats, bool training) {
    const auto& xs = x.shape();
    size_t outer, C, inner;
    axis_split(xs, channel_axis, outer, C, inner);
    if (gamma.numel() != C || beta.numel() != C)
        throw std::invalid_argument("batch_norm: affine params must have " + std::to_string(C) +
                                    " elements");
    if (stats.running_mean.numel() != C) {
        stats.running_mean = Tensor::zeros({C});
        stats.running_var = Tensor::ones({C});
    }
    size_t per_ch = outer * inner;
    const double* xv = x.value().data();
    const double* gv = gamma.value().data();
    const double* bv = beta.value().data();

    std::vector<double> mean(C), var(C);
    if (training) {
        for (size_t c = 0; c < C; ++c) {
            double m = 0.0;
            for (size_t o = 0; o < outer; ++o)
                for (size_t in = 0; in < inner; ++in) m += xv[(o * C + c) * inner + in];
            m /= double(per_ch);
            double v = 0.0;
            for (size_t o = 0; o < outer; ++o)
                for (size_t in = 0; in < inner; ++in) {
                    double d = xv[(o * C + c) * inner + in] - m;
                    v += d * d;
                }
            v /= double(per_ch);
            mean[c] = m;
            var[c] = v;
            stats.running_mean[c] =
                (1.0 - stats.momentum) * stats.running_mean[c] + stats.momentum * m;
            stats.running_var[c] =
                (1.0 - stats.momentum) * stats.running_var[c] + stats.momentum * v;
        }
    } else {
        for (size_t c = 0; c < C; ++c) {
            mean[c] = stats.running_mean[c];
            var[c] = stats.running_var[c];
        }
    }

    Tensor out(xs);
    auto xhat = std::make_shared<Tensor>(xs);
    auto invstd = std::make_shared<std::vector<double>>(C);
    double eps = stats.eps;
    for (size_t c = 0; c < C; ++c) (*invstd)[c] = 1.0 / std::sqrt(var[c] + eps);
    for (size_t o = 0; o < outer; ++o)
        for (size_t c = 0; c < C; ++c)
            for (size_t in = 0; in < inner; ++in) {
                size_t idx = (o * C + c) * inner + in;
                double xh = (xv[idx] - mean[c]) * (*invstd)[c];
                (*xhat)[idx] = xh;
                out[idx] = gv[c] * xh + bv[c];
            }

    Var vx = x, vg = gamma, vb = beta;
    bool use_batch_stats = training;
    return Var::make(
        std::move(out), {x, gamma, beta},
        [vx, vg, vb, xhat, invstd, outer, C, inner, per_ch, use_batch_stats](Var::Node& n) mutable {
            const double* g = n.grad.data();
            const double* gv2 = vg.value().data();
            double* gx = vx.requires_grad() ? vx.grad().data() : nullptr;
            double* gg = vg.requires_grad() ? vg.grad().data() : nullptr;
            double* gb = vb.requires_grad() ? vb.grad().data() : nullptr;
            for (size_t c = 0; c < C; ++c) {
                double sum_dy = 0.0, sum_dyxh = 0.0;
                for (size_t o = 0; o < outer; ++o)
                    for (size_t in = 0; in < inner; ++in) {
                        size_t idx = (o * C + c) * inner + in;
                        sum_dy += g[idx];
                        sum_dyxh += g[idx] * (*xhat)[idx];
                    }
                if (gg) gg[c] += sum_dyxh;
                if (gb) gb[c] += sum_dy;
                if (gx) {
                    double is = (*invstd)[c];
                    for (size_t o = 0; o < outer; ++o)
                        for (size_t in = 0; in < inner; ++in) {
                            size_t idx = (o * C + c) * inner + in;
                            if (use_batch_stats) {
                                gx[idx] += gv2[c] * is *
                                           (g[idx] - (sum_dy + (*xhat)[idx] * sum_dyxh) /
                                                         double(per_ch));
                            } else {
                                gx[idx] += gv2[c] * is * g[idx];
                            }
                        }
                }
            }
        });
}

}  // namespace swg
