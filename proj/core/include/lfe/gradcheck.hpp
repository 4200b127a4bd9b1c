#pragma once

#include "lfe/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace lfe {

/// Max discrepancy between analytic gradients and central finite
/// differences (step h) over the given parameter tensors. Errors are
/// measured as |analytic - fd| / max(1, |analytic|, |fd|). At most
/// max_samples elements are probed per tensor.
double max_gradient_error(const std::function<Tensor()>& loss_fn,
                          std::vector<Tensor>& params, double h = 1e-5,
                          int max_samples = 64,
                          std::uint64_t sample_seed = 0);

struct GradCheckReport {
    std::string name;
    double max_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Finite-difference sweep over every differentiable op plus miniature
/// generator and discriminator configs, across `seeds` random draws.
std::vector<GradCheckReport> run_gradcheck_suite(int seeds,
                                                 double tol_ops = 1e-4,
                                                 double tol_nets = 1e-3);

}  // namespace lfe
