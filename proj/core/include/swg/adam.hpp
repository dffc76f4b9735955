#pragma once

#include <vector>

#include "swg/autodiff.hpp"

namespace swg {

// Adam with bias correction. Moment buffers are keyed by position in the
// parameter list, which must stay stable across steps.
class Adam {
public:
    explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<Var>& params);
    void zero_grad(std::vector<Var>& params) {
        for (auto& p : params) p.zero_grad();
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    long long step_count() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace swg
