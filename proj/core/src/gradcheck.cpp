#include "swg/gradcheck.hpp"

#include <cmath>
#include <cstdio>

namespace swg {

GradCheckResult grad_check(const std::function<Var()>& make_loss, std::vector<Var> params,
                           double step) {
    for (auto& p : params) p.zero_grad();
    Var loss = make_loss();
    backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    GradCheckResult res;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& w = params[pi].value_mut();
        for (size_t j = 0; j < w.numel(); ++j) {
            double saved = w[j];
            w[j] = saved + step;
            double lp = make_loss().value()[0];
            w[j] = saved - step;
            double lm = make_loss().value()[0];
            w[j] = saved;
            double fd = (lp - lm) / (2.0 * step);
            double a = analytic[pi][j];
            double abs_err = std::fabs(fd - a);
            double rel = abs_err / std::max({std::fabs(fd), std::fabs(a), 1e-3});
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = "param" + std::to_string(pi) + "[" + std::to_string(j) + "]";
            }
            res.max_abs_err = std::max(res.max_abs_err, abs_err);
        }
    }
    return res;
}

}  // namespace swg
