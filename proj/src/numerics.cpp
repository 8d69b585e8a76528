#include "erc/numerics.hpp"

#include <cmath>

namespace erc {

Tensor softmax(const Tensor& x) {
    return softmax_rows(x);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    return layer_norm_rows(x, gain, bias, eps);
}

Tensor linear(const Tensor& x, const Tensor& W, const std::optional<Tensor>& b) {
    if (x.cols() != W.rows()) {
        throw NumericError("linear: shape mismatch: x " + x.shape_str() + " vs W " + W.shape_str());
    }
    Tensor y = matmul(x, W);
    if (b) {
        if (b->size() != y.cols()) {
            throw NumericError("linear: bias shape " + b->shape_str() + " does not match output " + y.shape_str());
        }
        for (int i = 0; i < y.rows(); ++i)
            for (int j = 0; j < y.cols(); ++j) y.at(i, j) += b->v[j];
    }
    return y;
}

GradReport grad_check(ParamSet& params, const std::function<double(bool)>& loss_fn, double eps, double tol) {
    params.zero_grads();
    double base = loss_fn(true);
    if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss " + std::to_string(base));

    // snapshot analytic gradients before perturbing
    std::vector<Tensor> analytic(params.count());
    for (int i = 0; i < params.count(); ++i) analytic[i] = params[i].grad;

    GradReport report;
    for (int i = 0; i < params.count(); ++i) {
        ParamTensor& p = params[i];
        if (!p.trainable) continue;
        GradCheckEntry entry;
        entry.param = p.name;
        for (int64_t k = 0; k < p.value.size(); ++k) {
            double orig = p.value[k];
            p.value[k] = orig + eps;
            double up = loss_fn(false);
            p.value[k] = orig - eps;
            double down = loss_fn(false);
            p.value[k] = orig;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError("grad_check: non-finite loss while perturbing " + p.name);
            }
            double numeric = (up - down) / (2.0 * eps);
            double a = analytic[i][k];
            double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            double rel = std::fabs(a - numeric) / denom;
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        entry.pass = entry.max_rel_err <= tol;
        report.worst = std::max(report.worst, entry.max_rel_err);
        report.all_pass = report.all_pass && entry.pass;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

} // namespace erc
