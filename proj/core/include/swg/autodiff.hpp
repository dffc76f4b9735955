#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "swg/tensor.hpp"

namespace swg {

// Reverse-mode tape node. A Var is a shared handle; ops build the graph as
// they compute forward values, backward() replays it in reverse topological
// order. Gradients accumulate until zero_grad().
class Var {
public:
    struct Node {
        Tensor value;
        Tensor grad;  // allocated on demand, same shape as value
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        // Reads this->grad, accumulates into parents' grads.
        std::function<void(Node&)> back;

        Tensor& ensure_grad() {
            if (grad.empty()) grad = Tensor::zeros(value.shape());
            return grad;
        }
    };

    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false)
        : n_(std::make_shared<Node>()) {
        n_->value = std::move(value);
        n_->requires_grad = requires_grad;
    }

    static Var make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> back);

    bool defined() const { return n_ != nullptr; }
    const Tensor& value() const { return n_->value; }
    Tensor& value_mut() { return n_->value; }
    const std::vector<size_t>& shape() const { return n_->value.shape(); }
    size_t numel() const { return n_->value.numel(); }
    bool requires_grad() const { return n_ && n_->requires_grad; }

    Tensor& grad() { return n_->ensure_grad(); }
    const Tensor& grad() const { return n_->ensure_grad(); }
    void zero_grad() {
        if (n_) n_->ensure_grad().fill(0.0);
    }

    std::shared_ptr<Node> node() const { return n_; }

private:
    mutable std::shared_ptr<Node> n_;
};

// Reverse accumulation from a scalar loss. Throws if loss is not a
// single-element tensor. Calling twice without zeroing accumulates.
void backward(const Var& loss);

// A learnable weight: a Var that requires grad and persists across steps.
inline Var make_parameter(Tensor value) { return Var(std::move(value), true); }

}  // namespace swg
