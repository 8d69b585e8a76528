#pragma once

#include <functional>
#include <optional>

#include "erc/params.hpp"
#include "erc/tensor.hpp"

namespace erc {

// Row softmax / layer norm / affine map with the contracts the rest of the
// model is written against. These are the plain-value entry points; the
// differentiable versions live in autograd.hpp and share the same kernels.

Tensor softmax(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// y = x W (+ b). Shape mismatches name both shapes in the error.
Tensor linear(const Tensor& x, const Tensor& W, const std::optional<Tensor>& b = std::nullopt);

struct GradCheckEntry {
    std::string param;
    double max_rel_err = 0.0;
    bool pass = true;
};

struct GradReport {
    std::vector<GradCheckEntry> entries;
    double worst = 0.0;
    bool all_pass = true;
};

// Central-difference check of d(loss)/d(theta) for every trainable tensor in
// params. loss_fn(true) must run a full forward+backward and leave gradients
// in params; loss_fn(false) must only return the loss for the current values.
// Relative error per scalar is |a-n| / max(|a|, |n|, 1e-8).
GradReport grad_check(ParamSet& params, const std::function<double(bool with_grad)>& loss_fn,
                      double eps, double tol);

} // namespace erc
