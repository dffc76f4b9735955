#pragma once

#include <functional>
#include <string>
#include <vector>

#include "swg/autodiff.hpp"

namespace swg {

struct GradCheckResult {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::string worst;  // "param[i]" of the worst element
    bool passed(double tol) const { return max_rel_err < tol; }
};

// Central finite differences against reverse-mode gradients. `make_loss`
// must rebuild the scalar loss from the current parameter values on every
// call (the tape is single-use).
GradCheckResult grad_check(const std::function<Var()>& make_loss, std::vector<Var> params,
                           double step = 1e-5);

// Runs every per-op and per-block finite-difference suite; returns failures.
// Used by both the unit tests and the gradcheck CLI subcommand.
std::vector<std::string> run_gradient_suites(bool include_model, bool verbose = false);

}  // namespace swg
