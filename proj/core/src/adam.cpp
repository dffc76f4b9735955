#include "swg/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace swg {

void Adam::step(std::vector<Var>& params) {
    if (m_.empty()) {
        for (auto& p : params) {
            m_.push_back(Tensor::zeros(p.shape()));
            v_.push_back(Tensor::zeros(p.shape()));
        }
    }
    if (m_.size() != params.size())
        throw std::invalid_argument("Adam::step: parameter list size changed");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, double(t_));
    double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& w = params[i].value_mut();
        const Tensor& g = params[i].grad();
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (size_t j = 0; j < w.numel(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace swg
