#include <doctest.h>

#include <cmath>
#include <limits>

#include "erc/autograd.hpp"
#include "erc/numerics.hpp"
#include "erc/tensor.hpp"

using namespace erc;

namespace {

const double kNegInf = -std::numeric_limits<double>::infinity();

// central-difference check for a scalar-valued graph over one leaf tensor
double op_grad_max_err(const std::function<Var(const Var&)>& build, const Tensor& x0, double eps = 1e-6) {
    ParamSet ps;
    int idx = ps.add("x", x0, ParamGroup::Transformer);
    auto loss = [&](bool with_grad) {
        Binder bind(ps, with_grad);
        Var y = build(bind[idx]);
        // fold the output into a scalar with fixed weights so every output
        // coordinate contributes a distinct gradient
        Tensor w(y->val.shape);
        for (int64_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
        Var s = sum_all(mul_const(y, w));
        if (with_grad) {
            backward(s);
            bind.collect_grads();
        }
        return s->val[0];
    };
    GradReport r = grad_check(ps, loss, eps, 1e-6);
    return r.worst;
}

Tensor rand_tensor(std::vector<int> shape, Rng& rng, double scl = 1.0) {
    return random_normal(std::move(shape), 0.0, scl, rng);
}

} // namespace

TEST_CASE("softmax examples") {
    Tensor even = softmax(Tensor::row({0.0, 0.0}));
    CHECK(even[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(even[1] == doctest::Approx(0.5).epsilon(1e-12));

    Tensor masked = softmax(Tensor::row({0.0, kNegInf}));
    CHECK(masked[0] == 1.0);
    CHECK(masked[1] == 0.0); // exact zero at the masked position

    // frozen from a high-precision exp-normalize evaluation
    Tensor t = softmax(Tensor::row({1.0, 2.0, 3.0}));
    CHECK(t[0] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
    CHECK(t[1] == doctest::Approx(0.24472847105479767).epsilon(1e-12));
    CHECK(t[2] == doctest::Approx(0.66524095577482183).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(softmax(Tensor::row({kNegInf, kNegInf})), doctest::Contains("fully masked row"),
                         NumericError);
}

TEST_CASE("softmax is a probability row and permutation-equivariant") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        int n = rng.uniform_int(2, 9);
        Tensor x = rand_tensor({1, n}, rng, 3.0);
        Tensor y = softmax(x);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            CHECK(y[j] >= 0.0);
            sum += y[j];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

        // random permutation
        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
        Tensor xp({1, n});
        for (int i = 0; i < n; ++i) xp[i] = x[perm[i]];
        Tensor yp = softmax(xp);
        for (int i = 0; i < n; ++i) CHECK(yp[i] == doctest::Approx(y[perm[i]]).epsilon(1e-14));
    }
}

TEST_CASE("layer_norm examples") {
    Tensor unit_gain = Tensor::row({1.0, 1.0});
    Tensor zero_bias = Tensor::row({0.0, 0.0});

    Tensor constant_row = layer_norm(Tensor::row({3.7, 3.7}), unit_gain, zero_bias, 1e-5);
    CHECK(constant_row[0] == 0.0);
    CHECK(constant_row[1] == 0.0);

    Tensor already = layer_norm(Tensor::row({1.0, -1.0}), unit_gain, zero_bias, 1e-12);
    CHECK(already[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(already[1] == doctest::Approx(-1.0).epsilon(1e-9));

    // x=[0,2], gain=[2,2], bias=[1,1], eps=1e-5: mean 1, var 1,
    // out = 1 +- 2/sqrt(1+1e-5)
    Tensor t = layer_norm(Tensor::row({0.0, 2.0}), Tensor::row({2.0, 2.0}), Tensor::row({1.0, 1.0}), 1e-5);
    double dev = 2.0 / std::sqrt(1.0 + 1e-5);
    CHECK(t[0] == doctest::Approx(1.0 - dev).epsilon(1e-12));
    CHECK(t[1] == doctest::Approx(1.0 + dev).epsilon(1e-12));

    CHECK_THROWS_AS(layer_norm(Tensor::row({1.0}), Tensor::row({1.0, 1.0}), zero_bias, 1e-5), NumericError);
}

TEST_CASE("layer_norm normalizes rows") {
    Rng rng(11);
    int n = 6;
    Tensor x = rand_tensor({3, n}, rng, 4.0);
    Tensor y = layer_norm(x, Tensor::full({1, n}, 1.0), Tensor({1, n}), 1e-9);
    for (int i = 0; i < 3; ++i) {
        double mean = 0.0, var = 0.0;
        for (int j = 0; j < n; ++j) mean += y.at(i, j);
        mean /= n;
        for (int j = 0; j < n; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
        var /= n;
        CHECK(std::fabs(mean) < 1e-9);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("linear examples") {
    Tensor x = Tensor::row({1.0, 2.0});
    CHECK(linear(x, Tensor::identity(2)).v == x.v);

    Tensor zeroW({2, 3});
    Tensor b = Tensor::row({4.0, 5.0, 6.0});
    Tensor y = linear(x, zeroW, b);
    CHECK(y.v == b.v);

    Tensor W({2, 2}, {1.0, 0.0, 0.0, 3.0});
    Tensor z = linear(x, W);
    CHECK(z[0] == 1.0);
    CHECK(z[1] == 6.0);

    CHECK_THROWS_WITH_AS(linear(Tensor::row({1.0, 2.0, 3.0}), W), doctest::Contains("[1, 3]"), NumericError);
    CHECK_THROWS_WITH_AS(linear(Tensor::row({1.0, 2.0, 3.0}), W), doctest::Contains("[2, 2]"), NumericError);
}

TEST_CASE("linear is exactly linear without bias") {
    Rng rng(3);
    Tensor W = rand_tensor({4, 3}, rng);
    Tensor x = rand_tensor({2, 4}, rng);
    Tensor z = rand_tensor({2, 4}, rng);
    double a = 0.37, b = -1.21;
    Tensor lhs = linear(add(scale(x, a), scale(z, b)), W);
    Tensor rhs = add(scale(linear(x, W), a), scale(linear(z, W), b));
    for (int64_t i = 0; i < lhs.size(); ++i) CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-12));
}

TEST_CASE("grad_check trivial cases") {
    SUBCASE("quadratic loss has gradient p") {
        Rng rng(5);
        ParamSet ps;
        int idx = ps.add("p", rand_tensor({3, 2}, rng), ParamGroup::Transformer);
        auto loss = [&](bool with_grad) {
            Binder bind(ps, with_grad);
            Var p = bind[idx];
            Var s = scale(sum_all(mul(p, p)), 0.5);
            if (with_grad) {
                backward(s);
                bind.collect_grads();
            }
            return s->val[0];
        };
        GradReport r = grad_check(ps, loss, 1e-5, 1e-6);
        CHECK(r.all_pass);
        CHECK(r.worst < 1e-6);
        // analytic gradient of .5||p||^2 is p itself
        ps.zero_grads();
        loss(true);
        for (int64_t i = 0; i < ps[idx].value.size(); ++i) {
            CHECK(ps[idx].grad[i] == doctest::Approx(ps[idx].value[i]).epsilon(1e-12));
        }
    }
    SUBCASE("constant loss passes with zero gradients") {
        ParamSet ps;
        ps.add("p", Tensor::row({1.0, 2.0}), ParamGroup::Transformer);
        auto loss = [&](bool) { return 42.0; };
        GradReport r = grad_check(ps, loss, 1e-5, 1e-6);
        CHECK(r.all_pass);
    }
    SUBCASE("non-finite loss is rejected") {
        ParamSet ps;
        ps.add("p", Tensor::row({1.0}), ParamGroup::Transformer);
        auto loss = [&](bool) { return std::numeric_limits<double>::quiet_NaN(); };
        CHECK_THROWS_AS(grad_check(ps, loss, 1e-5, 1e-6), NumericError);
    }
}

TEST_CASE("per-op gradients agree with central differences") {
    Rng rng(23);
    Tensor m34 = rand_tensor({3, 4}, rng);
    Tensor m43 = rand_tensor({4, 3}, rng);
    Tensor m33 = rand_tensor({3, 3}, rng);

    CHECK(op_grad_max_err([&](const Var& x) { return matmul(x, constant(m43)); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return matmul(constant(m34), x); }, m43) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return transpose(x); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return add(x, constant(m34)); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return sub(constant(m34), x); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return mul(x, constant(m34)); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return mul(x, x); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return scale(x, -2.5); }, m34) < 1e-7);
    Tensor r14 = rand_tensor({1, 4}, rng);
    CHECK(op_grad_max_err([&](const Var& x) { return add_rowvec(constant(m34), x); }, r14) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return add_rowvec(x, constant(r14)); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return add_colvec(constant(m34), x); }, rand_tensor({3, 1}, rng)) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return relu(x); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return leaky_relu(x, 0.2); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return sigmoid(x); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return softmax_rows(x); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return log_softmax_rows(x); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return logsumexp_rows(x); }, m34) < 1e-7);

    Tensor mask({3, 4});
    mask.at(0, 1) = kNegInf;
    mask.at(2, 0) = kNegInf;
    mask.at(2, 3) = kNegInf;
    CHECK(op_grad_max_err([&](const Var& x) { return masked_softmax_rows(x, mask); }, m34) < 1e-7);

    CHECK(op_grad_max_err([&](const Var& x) {
              return layer_norm_rows(x, constant(Tensor::row({1.1, 0.9, 1.3, 0.8})),
                                     constant(Tensor::row({0.1, -0.2, 0.0, 0.3})), 1e-5);
          }, m34) < 1e-6);
    CHECK(op_grad_max_err([&](const Var& x) {
              return layer_norm_rows(constant(m34), x, constant(Tensor::row({0.1, -0.2, 0.0, 0.3})), 1e-5);
          }, Tensor::row({1.1, 0.9, 1.3, 0.8})) < 1e-6);
    CHECK(op_grad_max_err([&](const Var& x) {
              return layer_norm_rows(constant(m34), constant(Tensor::row({1.1, 0.9, 1.3, 0.8})), x, 1e-5);
          }, Tensor::row({0.1, -0.2, 0.0, 0.3})) < 1e-7);

    CHECK(op_grad_max_err([&](const Var& x) { return concat_cols({x, constant(m33), x}); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return concat_rows({x, constant(m34)}); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return slice_rows(x, 1, 2); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return slice_cols(x, 1, 3); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return pick(x, 2, 1); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return rows_lookup(x, {2, 0, 2, 1}); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) {
              return gather_matrix(x, {0, 1, -1, 2, 1, 0}, 2, 3);
          }, rand_tensor({1, 3}, rng)) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return im2col(x, 2); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return im2col(x, 5); }, m34) < 1e-7); // padded case
    CHECK(op_grad_max_err([&](const Var& x) { return colwise_max(x); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return mul_const(x, m34); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return sum_all(x); }, m34) < 1e-7);

    Tensor z01({3, 4});
    for (int64_t i = 0; i < z01.size(); ++i) z01[i] = 0.2 + 0.05 * static_cast<double>(i);
    Tensor other = rand_tensor({3, 4}, rng);
    CHECK(op_grad_max_err([&](const Var& x) { return fuse_mix(constant(z01), x, constant(other)); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return fuse_mix(sigmoid(x), constant(m34), constant(other)); }, m34) < 1e-7);
    CHECK(op_grad_max_err([&](const Var& x) { return fuse_mix(constant(z01), constant(m34), x); }, other) < 1e-7);
}

TEST_CASE("forward ops keep finite inputs finite") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = rand_tensor({4, 5}, rng, 10.0);
        Tensor b = rand_tensor({5, 4}, rng, 10.0);
        CHECK(matmul(a, b).all_finite());
        CHECK(softmax_rows(a).all_finite());
        CHECK(log_softmax_rows(a).all_finite());
        CHECK(logsumexp_rows(a).all_finite());
        CHECK(layer_norm_rows(a, Tensor::full({1, 5}, 1.0), Tensor({1, 5}), 1e-5).all_finite());
    }
}

TEST_CASE("backward accumulates across shared subexpressions") {
    // y = x + x; dy/dx = 2
    Var x = leaf(Tensor::row({3.0}));
    Var y = sum_all(add(x, x));
    backward(y);
    CHECK(x->grad[0] == 2.0);
}

TEST_CASE("backward requires scalar root") {
    Var x = leaf(Tensor::row({1.0, 2.0}));
    CHECK_THROWS_AS(backward(add(x, x)), NumericError);
}
