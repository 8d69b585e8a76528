#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "erc/common.hpp"

namespace erc {

// Dense row-major array of doubles, rank 1 or 2. Rank-1 tensors are treated
// as 1xN rows wherever a matrix is expected.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<double> values);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double value);
    static Tensor row(std::vector<double> values);
    static Tensor col(std::vector<double> values);
    static Tensor identity(int n);

    int rank() const { return static_cast<int>(shape.size()); }
    int64_t size() const { return static_cast<int64_t>(v.size()); }
    int rows() const { return rank() == 1 ? 1 : shape[0]; }
    int cols() const { return rank() == 0 ? 0 : shape.back(); }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols() + c]; }
    double& operator[](int64_t i) { return v[i]; }
    double operator[](int64_t i) const { return v[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    std::string shape_str() const;

    void fill(double value);
    void add_scaled(const Tensor& o, double k); // v += k * o.v
    double squared_norm() const;
};

// Plain (non-differentiating) kernels. The autodiff layer wraps these, and
// module-level contracts (softmax, layer_norm, linear) are exposed on top of
// them in numerics.hpp.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);

// Row-wise softmax. Entries equal to -inf come out exactly 0; an all--inf row
// throws NumericError("fully masked row ...").
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor logsumexp_rows(const Tensor& a); // Nx1
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps);

Tensor random_uniform(std::vector<int> s, double lo, double hi, Rng& rng);
Tensor random_normal(std::vector<int> s, double mean, double stddev, Rng& rng);
// Glorot/fan-balanced init for a fan_in x fan_out weight matrix.
Tensor xavier_uniform(int fan_in, int fan_out, Rng& rng);

} // namespace erc
