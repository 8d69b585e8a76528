#include "erc/tensor.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace erc {

namespace {

int64_t shape_size(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d <= 0) throw NumericError("tensor dimension must be positive, got " + std::to_string(d));
        n *= d;
    }
    return s.empty() ? 0 : n;
}

void require_2d(const Tensor& t, const char* who) {
    if (t.rank() < 1 || t.rank() > 2) {
        throw NumericError(std::string(who) + ": rank-1 or rank-2 tensor required, got " + t.shape_str());
    }
}

} // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), v(shape_size(shape), 0.0) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> values) : shape(std::move(s)), v(std::move(values)) {
    if (static_cast<int64_t>(v.size()) != shape_size(shape)) {
        throw NumericError("tensor value count " + std::to_string(v.size()) + " does not match shape " + shape_str());
    }
}

Tensor Tensor::full(std::vector<int> s, double value) {
    Tensor t(std::move(s));
    t.fill(value);
    return t;
}

Tensor Tensor::row(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return Tensor({1, n}, std::move(values));
}

Tensor Tensor::col(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return Tensor({n, 1}, std::move(values));
}

Tensor Tensor::identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

bool Tensor::all_finite() const {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << "]";
    return os.str();
}

void Tensor::fill(double value) {
    for (double& x : v) x = value;
}

void Tensor::add_scaled(const Tensor& o, double k) {
    if (v.size() != o.v.size()) {
        throw NumericError("add_scaled: size mismatch " + shape_str() + " vs " + o.shape_str());
    }
    for (size_t i = 0; i < v.size(); ++i) v[i] += k * o.v[i];
}

double Tensor::squared_norm() const {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    if (a.cols() != b.rows()) {
        throw NumericError("matmul: inner dimensions disagree: " + a.shape_str() + " x " + b.shape_str());
    }
    int n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out({n, m});
    for (int i = 0; i < n; ++i) {
        for (int p = 0; p < k; ++p) {
            double aip = a.at(i, p);
            if (aip == 0.0) continue;
            const double* brow = &b.v[static_cast<size_t>(p) * m];
            double* orow = &out.v[static_cast<size_t>(i) * m];
            for (int j = 0; j < m; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    require_2d(a, "transpose");
    Tensor out({a.cols(), a.rows()});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw NumericError("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor out = a;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw NumericError("sub: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor out = a;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b.v[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw NumericError("mul: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor out = a;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b.v[i];
    return out;
}

Tensor scale(const Tensor& a, double k) {
    Tensor out = a;
    for (double& x : out.v) x *= k;
    return out;
}

Tensor softmax_rows(const Tensor& a) {
    require_2d(a, "softmax");
    const double ninf = -std::numeric_limits<double>::infinity();
    Tensor out(a.rank() == 1 ? std::vector<int>{a.cols()} : a.shape);
    int n = a.rows(), m = a.cols();
    for (int i = 0; i < n; ++i) {
        double mx = ninf;
        for (int j = 0; j < m; ++j) {
            double x = a.at(i, j);
            if (std::isnan(x)) throw NumericError("softmax: NaN input at row " + std::to_string(i));
            if (x > mx) mx = x;
        }
        if (mx == ninf) throw NumericError("fully masked row " + std::to_string(i) + " in softmax");
        double sum = 0.0;
        for (int j = 0; j < m; ++j) {
            double x = a.at(i, j);
            double e = (x == ninf) ? 0.0 : std::exp(x - mx);
            out.v[static_cast<size_t>(i) * m + j] = e;
            sum += e;
        }
        for (int j = 0; j < m; ++j) out.v[static_cast<size_t>(i) * m + j] /= sum;
    }
    return out;
}

Tensor log_softmax_rows(const Tensor& a) {
    require_2d(a, "log_softmax");
    const double ninf = -std::numeric_limits<double>::infinity();
    Tensor out = a;
    int n = a.rows(), m = a.cols();
    for (int i = 0; i < n; ++i) {
        double mx = ninf;
        for (int j = 0; j < m; ++j) mx = std::max(mx, a.at(i, j));
        if (mx == ninf) throw NumericError("fully masked row " + std::to_string(i) + " in log_softmax");
        double sum = 0.0;
        for (int j = 0; j < m; ++j) {
            double x = a.at(i, j);
            sum += (x == ninf) ? 0.0 : std::exp(x - mx);
        }
        double lse = mx + std::log(sum);
        for (int j = 0; j < m; ++j) out.v[static_cast<size_t>(i) * m + j] = a.at(i, j) - lse;
    }
    return out;
}

Tensor logsumexp_rows(const Tensor& a) {
    require_2d(a, "logsumexp");
    const double ninf = -std::numeric_limits<double>::infinity();
    int n = a.rows(), m = a.cols();
    Tensor out({n, 1});
    for (int i = 0; i < n; ++i) {
        double mx = ninf;
        for (int j = 0; j < m; ++j) mx = std::max(mx, a.at(i, j));
        if (mx == ninf) throw NumericError("fully masked row " + std::to_string(i) + " in logsumexp");
        double sum = 0.0;
        for (int j = 0; j < m; ++j) {
            double x = a.at(i, j);
            sum += (x == ninf) ? 0.0 : std::exp(x - mx);
        }
        out.at(i, 0) = mx + std::log(sum);
    }
    return out;
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    require_2d(a, "layer_norm");
    int n = a.rows(), m = a.cols();
    if (m == 0) throw NumericError("layer_norm: zero width");
    if (gain.size() != m || bias.size() != m) {
        throw NumericError("layer_norm: gain/bias width " + gain.shape_str() + "/" + bias.shape_str() +
                           " does not match input " + a.shape_str());
    }
    Tensor out = a;
    for (int i = 0; i < n; ++i) {
        double mean = 0.0;
        for (int j = 0; j < m; ++j) mean += a.at(i, j);
        mean /= m;
        double var = 0.0;
        for (int j = 0; j < m; ++j) {
            double d = a.at(i, j) - mean;
            var += d * d;
        }
        var /= m;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < m; ++j) {
            out.v[static_cast<size_t>(i) * m + j] = gain[j] * (a.at(i, j) - mean) * inv + bias[j];
        }
    }
    return out;
}

Tensor random_uniform(std::vector<int> s, double lo, double hi, Rng& rng) {
    Tensor t(std::move(s));
    for (double& x : t.v) x = rng.uniform(lo, hi);
    return t;
}

Tensor random_normal(std::vector<int> s, double mean, double stddev, Rng& rng) {
    Tensor t(std::move(s));
    for (double& x : t.v) x = mean + stddev * rng.normal();
    return t;
}

Tensor xavier_uniform(int fan_in, int fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    return random_uniform({fan_in, fan_out}, -limit, limit, rng);
}

} // namespace erc
