#include <doctest.h>

#include <cmath>

#include "erc/gnn.hpp"
#include "erc/numerics.hpp"
#include "oracles.hpp"

using namespace erc;

namespace {

DialogueGraph random_graph(Rng& rng, int max_n, int max_window, int speakers_count, int* n_out = nullptr) {
    int n = rng.uniform_int(1, max_n);
    int p = rng.uniform_int(0, max_window), f = rng.uniform_int(0, max_window);
    std::vector<int> speakers(n);
    for (int i = 0; i < n; ++i) speakers[i] = rng.uniform_int(0, speakers_count - 1);
    RelationVocab rel{speakers_count, std::max(p, f)};
    if (n_out) *n_out = n;
    return build_graph(n, speakers, p, f, rel);
}

Tensor random_alpha(const DialogueGraph& g, Rng& rng) {
    // positive at edges, normalized per target row
    Tensor alpha({g.n, g.n});
    for (int i = 0; i < g.n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < g.n; ++j) {
            if (g.edge_mask.at(i, j) == 0.0) {
                alpha.at(i, j) = 0.05 + rng.uniform();
                sum += alpha.at(i, j);
            }
        }
        for (int j = 0; j < g.n; ++j) alpha.at(i, j) /= sum;
    }
    return alpha;
}

} // namespace

TEST_CASE("aggregate examples") {
    SUBCASE("self-loops only with identity weights reproduce the input") {
        RelationVocab rel{1, 0};
        DialogueGraph g = build_graph(3, {0, 0, 0}, 0, 0, rel);
        Tensor feats({3, 2}, {1.0, -2.0, 3.0, 0.5, -0.25, 4.0});
        Tensor alpha = Tensor::identity(3); // alpha_ii = 1
        Tensor out = gnn_aggregate(feats, g, alpha, {}, Tensor::identity(2), GnnActivation::Identity);
        CHECK(out.v == feats.v);
    }
    SUBCASE("all-zero weights give exactly zero") {
        Rng rng(71);
        RelationVocab rel{2, 1};
        DialogueGraph g = build_graph(4, {0, 1, 1, 0}, 1, 1, rel);
        Tensor feats = random_normal({4, 3}, 0.0, 1.0, rng);
        Tensor alpha = random_alpha(g, rng);
        std::vector<Tensor> rel_w(rel.non_self_count(), Tensor({3, 3}));
        Tensor out = gnn_aggregate(feats, g, alpha, rel_w, Tensor({3, 3}), GnnActivation::Relu);
        for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
    }
    SUBCASE("three-node fixture matches the dense reference") {
        Rng rng(72);
        RelationVocab rel{2, 1};
        DialogueGraph g = build_graph(3, {0, 1, 0}, 1, 1, rel);
        Tensor feats = random_normal({3, 4}, 0.0, 1.0, rng);
        Tensor alpha = random_alpha(g, rng);
        std::vector<Tensor> rel_w;
        for (int r = 0; r < rel.non_self_count(); ++r) rel_w.push_back(random_normal({4, 4}, 0.0, 0.7, rng));
        Tensor self_w = random_normal({4, 4}, 0.0, 0.7, rng);
        Tensor ours = gnn_aggregate(feats, g, alpha, rel_w, self_w, GnnActivation::Relu);
        Tensor ref = oracles::dense_rgcn(feats, g, alpha, rel_w, self_w, true);
        for (int64_t i = 0; i < ours.size(); ++i) CHECK(std::fabs(ours[i] - ref[i]) <= 1e-12);
    }
}

TEST_CASE("aggregate equals dense reference on random graphs") {
    Rng rng(73);
    for (int trial = 0; trial < 60; ++trial) {
        int n = 0;
        DialogueGraph g = random_graph(rng, 10, 3, rng.uniform_int(1, 2), &n);
        Tensor feats = random_normal({n, 3}, 0.0, 1.0, rng);
        Tensor alpha = random_alpha(g, rng);
        std::vector<Tensor> rel_w;
        for (int r = 0; r < g.relations.non_self_count(); ++r) rel_w.push_back(random_normal({3, 3}, 0.0, 0.7, rng));
        Tensor self_w = random_normal({3, 3}, 0.0, 0.7, rng);
        Tensor ours = gnn_aggregate(feats, g, alpha, rel_w, self_w, GnnActivation::Relu);
        Tensor ref = oracles::dense_rgcn(feats, g, alpha, rel_w, self_w, true);
        for (int64_t i = 0; i < ours.size(); ++i) CHECK(std::fabs(ours[i] - ref[i]) <= 1e-10);
    }
}

TEST_CASE("aggregate locality: non-neighbors cannot move a target row") {
    Rng rng(74);
    RelationVocab rel{2, 1};
    // nodes 0 and 3 are outside each other's window (p = f = 1)
    DialogueGraph g = build_graph(4, {0, 1, 0, 1}, 1, 1, rel);
    Tensor feats = random_normal({4, 3}, 0.0, 1.0, rng);
    Tensor alpha = random_alpha(g, rng);
    std::vector<Tensor> rel_w;
    for (int r = 0; r < rel.non_self_count(); ++r) rel_w.push_back(random_normal({3, 3}, 0.0, 0.7, rng));
    Tensor self_w = random_normal({3, 3}, 0.0, 0.7, rng);

    Tensor base = gnn_aggregate(feats, g, alpha, rel_w, self_w, GnnActivation::Relu);
    Tensor bumped = feats;
    for (int c = 0; c < 3; ++c) bumped.at(3, c) += rng.uniform(0.5, 2.0);
    Tensor moved = gnn_aggregate(bumped, g, alpha, rel_w, self_w, GnnActivation::Relu);
    for (int c = 0; c < 3; ++c) CHECK(moved.at(0, c) == base.at(0, c)); // bit-invariant
}

TEST_CASE("fuse examples") {
    Rng rng(75);
    Tensor w = random_normal({8, 2}, 0.0, 1.0, rng);
    Tensor b = random_normal({1, 2}, 0.0, 1.0, rng);

    SUBCASE("equal inputs are returned exactly") {
        Tensor a = random_normal({3, 2}, 0.0, 2.0, rng);
        Tensor out = fuse(a, a, w, b);
        CHECK(out.v == a.v);
    }
    SUBCASE("saturated gate selects the first argument") {
        Tensor a = random_normal({2, 2}, 0.0, 1.0, rng);
        Tensor c = random_normal({2, 2}, 0.0, 1.0, rng);
        Tensor zero_w({8, 2});
        Tensor big_b = Tensor::full({1, 2}, 40.0);
        Tensor out = fuse(a, c, zero_w, big_b);
        for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(a[i]).epsilon(1e-12));
    }
    SUBCASE("hand-computed two-dimensional fixture") {
        // a = [1, 2], b = [3, -1]; W_z column k weights [a; b; a*b; a-b]
        // gate input = [1, 2, 3, -1, 3, -2, -2, 3]
        // W_z = first column 0.1 everywhere, second column 0.05; b_z = [0.2, -0.1]
        // z1 = sigmoid(0.1*(1+2+3-1+3-2-2+3) + 0.2) = sigmoid(0.9)
        // z2 = sigmoid(0.05*7 - 0.1) = sigmoid(0.25)
        // out = b + z*(a-b) = [3 + z1*(-2), -1 + z2*3]
        Tensor a = Tensor::row({1.0, 2.0});
        Tensor c = Tensor::row({3.0, -1.0});
        Tensor wz = Tensor::full({8, 2}, 0.0);
        for (int r = 0; r < 8; ++r) {
            wz.at(r, 0) = 0.1;
            wz.at(r, 1) = 0.05;
        }
        Tensor bz = Tensor::row({0.2, -0.1});
        double z1 = 1.0 / (1.0 + std::exp(-0.9));
        double z2 = 1.0 / (1.0 + std::exp(-0.25));
        Tensor out = fuse(a, c, wz, bz);
        CHECK(out[0] == doctest::Approx(3.0 + z1 * -2.0).epsilon(1e-12));
        CHECK(out[1] == doctest::Approx(-1.0 + z2 * 3.0).epsilon(1e-12));
    }
    SUBCASE("width mismatch is an error") {
        CHECK_THROWS(fuse(Tensor({1, 2}), Tensor({1, 3}), w, b));
    }
}

TEST_CASE("fuse output lies between its arguments elementwise") {
    Rng rng(76);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor a = random_normal({2, 3}, 0.0, 3.0, rng);
        Tensor c = random_normal({2, 3}, 0.0, 3.0, rng);
        Tensor w = random_normal({12, 3}, 0.0, 2.0, rng);
        Tensor b = random_normal({1, 3}, 0.0, 2.0, rng);
        Tensor out = fuse(a, c, w, b);
        for (int64_t i = 0; i < out.size(); ++i) {
            CHECK(out[i] >= std::min(a[i], c[i]));
            CHECK(out[i] <= std::max(a[i], c[i]));
        }
    }
}

TEST_CASE("gnn_forward") {
    Rng rng(77);
    GnnDims dims;
    dims.layers = 2;
    dims.feature_width = 4;
    dims.attn_width = 3;
    dims.attn_heads = 2;
    RelationVocab rel{2, 2};

    SUBCASE("zero layers return the input unchanged") {
        ParamSet ps;
        GnnDims d0 = dims;
        d0.layers = 0;
        GnnHandles gnn = register_gnn_params(ps, d0, rel, 2, 2, rng);
        DialogueGraph g = build_graph(3, {0, 1, 0}, 2, 2, rel);
        Tensor h = random_normal({3, 4}, 0.0, 1.0, rng);
        Binder bind(ps, false);
        Var out = gnn_forward(constant(h), g, bind, gnn);
        CHECK(out->val.v == h.v);
    }

    SUBCASE("feature width is preserved at every depth and runs are deterministic") {
        ParamSet ps;
        GnnHandles gnn = register_gnn_params(ps, dims, rel, 2, 2, rng);
        DialogueGraph g = build_graph(5, {0, 1, 0, 1, 1}, 2, 2, rel);
        Tensor h = random_normal({5, 4}, 0.0, 1.0, rng);
        Binder bind(ps, false);
        Var out1 = gnn_forward(constant(h), g, bind, gnn);
        CHECK(out1->val.rows() == 5);
        CHECK(out1->val.cols() == 4);
        Binder bind2(ps, false);
        Var out2 = gnn_forward(constant(h), g, bind2, gnn);
        CHECK(out1->val.v == out2->val.v); // bit-identical
    }

    SUBCASE("every parameter passes grad_check through a two-layer stack") {
        ParamSet ps;
        GnnHandles gnn = register_gnn_params(ps, dims, rel, 1, 1, rng);
        DialogueGraph g = build_graph(4, {0, 1, 1, 0}, 1, 1, rel);
        Tensor h = random_normal({4, 4}, 0.0, 1.0, rng);
        Tensor fold = random_normal({4, 4}, 0.0, 1.0, rng);
        auto loss = [&](bool with_grad) {
            Binder bind(ps, with_grad);
            Var out = gnn_forward(constant(h), g, bind, gnn);
            Var s = sum_all(mul_const(out, fold));
            if (with_grad) {
                backward(s);
                bind.collect_grads();
            }
            return s->val[0];
        };
        GradReport r = grad_check(ps, loss, 1e-5, 1e-4);
        CHECK(r.all_pass);
        CHECK(r.worst < 1e-4);
    }
}
