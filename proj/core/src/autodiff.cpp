#include "swg/autodiff.hpp"

#include <stdexcept>
#include <unordered_set>

namespace swg {

Var Var::make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> back) {
    Var out(std::move(value));
    bool req = false;
    for (const auto& p : parents) {
        if (p.defined()) {
            out.n_->parents.push_back(p.node());
            req = req || p.requires_grad();
        }
    }
    out.n_->requires_grad = req;
    if (req) out.n_->back = std::move(back);
    return out;
}

void backward(const Var& loss) {
    if (!loss.defined()) throw std::invalid_argument("backward: undefined variable");
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    loss.value().shape_str());

    // Iterative post-order DFS; graphs can be deep (250-frame sequences).
    std::vector<Var::Node*> order;
    std::unordered_set<Var::Node*> visited;
    struct Frame {
        Var::Node* node;
        size_t next_child;
    };
    std::vector<Frame> stack;
    Var::Node* root = loss.node().get();
    if (!root->requires_grad) return;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_child < f.node->parents.size()) {
            Var::Node* child = f.node->parents[f.next_child++].get();
            if (child->requires_grad && !visited.count(child)) {
                visited.insert(child);
                stack.push_back({child, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Var::Node* n = *it;
        if (n->back) n->back(*n);
    }
}

}  // namespace swg
