#include "erc/gnn.hpp"

#include <cmath>
#include <set>

namespace erc {

namespace {

Var apply_activation(const Var& x, GnnActivation act) {
    switch (act) {
        case GnnActivation::Relu: return relu(x);
        case GnnActivation::Identity: return x;
        case GnnActivation::Tanh: {
            // tanh(x) = 2 sigmoid(2x) - 1 composed from primitives
            Var s = sigmoid(scale(x, 2.0));
            return sub(scale(s, 2.0), constant(Tensor::full(x->val.shape, 1.0)));
        }
    }
    throw NumericError("unknown activation");
}

// relation ids actually present among non-self edges, ascending
std::vector<int> realized_relations(const DialogueGraph& graph) {
    std::set<int> rel;
    for (const auto& e : graph.edges) {
        if (e.src != e.dst) rel.insert(e.relation);
    }
    return {rel.begin(), rel.end()};
}

// C_r[i][j] = 1/|N_i^r| when edge (j->i) carries relation r, else 0
Tensor relation_norm_mask(const DialogueGraph& graph, int relation) {
    int n = graph.n;
    Tensor mask({n, n});
    std::vector<int> count(n, 0);
    for (const auto& e : graph.edges) {
        if (e.relation == relation && e.src != e.dst) {
            mask.at(e.dst, e.src) = 1.0;
            ++count[e.dst];
        }
    }
    for (int i = 0; i < n; ++i) {
        if (count[i] == 0) continue;
        double inv = 1.0 / count[i];
        for (int j = 0; j < n; ++j) mask.at(i, j) *= inv;
    }
    return mask;
}

} // namespace

GnnHandles register_gnn_params(ParamSet& ps, const GnnDims& dims, const RelationVocab& relations,
                               int past, int future, Rng& rng) {
    GnnHandles gnn;
    gnn.dims = dims;
    int f = dims.feature_width;
    gnn.position_table = ps.add("gnn.position_table",
                                random_uniform({position_rows(past, future), dims.attn_width}, -0.1, 0.1, rng),
                                ParamGroup::Graph);
    for (int l = 0; l < dims.layers; ++l) {
        GnnHandles::Layer layer;
        std::string base = "gnn.l" + std::to_string(l) + ".";
        for (int r = 0; r < relations.non_self_count(); ++r) {
            layer.relation_w.push_back(ps.add(base + "rel" + std::to_string(r) + ".w",
                                              xavier_uniform(f, f, rng), ParamGroup::Graph));
        }
        layer.self_w = ps.add(base + "self.w", xavier_uniform(f, f, rng), ParamGroup::Graph);
        for (int h = 0; h < dims.attn_heads; ++h) {
            std::string hb = base + "attn.h" + std::to_string(h) + ".";
            layer.attn_w.push_back(ps.add(hb + "w", xavier_uniform(f, dims.attn_width, rng), ParamGroup::Graph));
            layer.attn_a.push_back(ps.add(hb + "a", random_uniform({2 * dims.attn_width, 1}, -0.1, 0.1, rng),
                                          ParamGroup::Graph));
        }
        layer.fuse_w = ps.add(base + "fuse.w", xavier_uniform(4 * f, f, rng), ParamGroup::Graph);
        layer.fuse_b = ps.add(base + "fuse.b", Tensor({1, f}), ParamGroup::Graph);
        gnn.layers.push_back(layer);
    }
    return gnn;
}

Var gnn_aggregate_var(const Var& g_prev, const DialogueGraph& graph, const Var& alpha,
                      Binder& bind, const GnnHandles& gnn, int layer) {
    const auto& lp = gnn.layers[layer];
    Var acc;
    for (int r : realized_relations(graph)) {
        Tensor mask = relation_norm_mask(graph, r);
        Var term = matmul(mul_const(alpha, mask), matmul(g_prev, bind[lp.relation_w[r]]));
        acc = acc ? add(acc, term) : term;
    }
    Var self_term = matmul(mul_const(alpha, Tensor::identity(graph.n)), matmul(g_prev, bind[lp.self_w]));
    acc = acc ? add(acc, self_term) : self_term;
    return apply_activation(acc, gnn.dims.activation);
}

Tensor gnn_aggregate(const Tensor& g_prev, const DialogueGraph& graph, const Tensor& alpha,
                     const std::vector<Tensor>& relation_w, const Tensor& self_w,
                     GnnActivation activation) {
    ParamSet ps;
    GnnHandles gnn;
    gnn.dims.activation = activation;
    gnn.dims.feature_width = g_prev.cols();
    GnnHandles::Layer layer;
    for (size_t r = 0; r < relation_w.size(); ++r) {
        layer.relation_w.push_back(ps.add("rel" + std::to_string(r), relation_w[r], ParamGroup::Graph));
    }
    layer.self_w = ps.add("self", self_w, ParamGroup::Graph);
    gnn.layers.push_back(layer);
    Binder bind(ps, false);
    return gnn_aggregate_var(constant(g_prev), graph, constant(alpha), bind, gnn, 0)->val;
}

Var fuse_var(const Var& a, const Var& b, const Var& fuse_w, const Var& fuse_b) {
    if (!a->val.same_shape(b->val)) {
        throw NumericError("fuse: width mismatch " + a->val.shape_str() + " vs " + b->val.shape_str());
    }
    Var gate_in = concat_cols({a, b, mul(a, b), sub(a, b)});
    Var z = sigmoid(add_rowvec(matmul(gate_in, fuse_w), fuse_b));
    return fuse_mix(z, a, b);
}

Tensor fuse(const Tensor& a, const Tensor& b, const Tensor& fuse_w, const Tensor& fuse_b) {
    return fuse_var(constant(a), constant(b), constant(fuse_w), constant(fuse_b))->val;
}

Var gnn_forward(const Var& h, const DialogueGraph& graph, Binder& bind, const GnnHandles& gnn) {
    Var g = h;
    for (size_t l = 0; l < gnn.layers.size(); ++l) {
        EdgeAttentionVars attn;
        for (int idx : gnn.layers[l].attn_w) attn.W.push_back(bind[idx]);
        for (int idx : gnn.layers[l].attn_a) attn.a.push_back(bind[idx]);
        attn.position_table = bind[gnn.position_table];
        Var alpha = edge_weights_var(g, graph, attn);
        Var aggregated = gnn_aggregate_var(g, graph, alpha, bind, gnn, static_cast<int>(l));
        g = fuse_var(aggregated, g, bind[gnn.layers[l].fuse_w], bind[gnn.layers[l].fuse_b]);
    }
    return g;
}

} // namespace erc
