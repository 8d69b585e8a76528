#pragma once

#include <vector>

#include "erc/graph.hpp"
#include "erc/params.hpp"

namespace erc {

// Relational aggregation reweighted by position-aware edge attention, with a
// gated fusion between consecutive layers.

enum class GnnActivation { Relu, Identity, Tanh };

struct GnnDims {
    int layers = 2;
    int feature_width = 300; // F, equals the transformer output width
    int attn_width = 64;     // F'
    int attn_heads = 3;
    GnnActivation activation = GnnActivation::Relu;
};

struct GnnHandles {
    GnnDims dims;
    int position_table = -1; // shared across layers and heads
    struct Layer {
        std::vector<int> relation_w; // one per relation id (self excluded)
        int self_w = -1;
        std::vector<int> attn_w; // per head
        std::vector<int> attn_a; // per head
        int fuse_w = -1;         // 4F x F
        int fuse_b = -1;         // 1 x F
    };
    std::vector<Layer> layers;
};

GnnHandles register_gnn_params(ParamSet& ps, const GnnDims& dims, const RelationVocab& relations,
                               int past, int future, Rng& rng);

// One aggregation step (no fusion): for each target i,
//   sigma( sum_r sum_{j in N_i^r} alpha_ij / c_{i,r} * g_j W_r  +  alpha_ii * g_i W_self )
// with c_{i,r} = |N_i^r|. alpha rows must be normalized per target.
Var gnn_aggregate_var(const Var& g_prev, const DialogueGraph& graph, const Var& alpha,
                      Binder& bind, const GnnHandles& gnn, int layer);

// Plain-value entry point for tests: explicit per-relation matrices indexed
// by relation id (self matrix passed separately).
Tensor gnn_aggregate(const Tensor& g_prev, const DialogueGraph& graph, const Tensor& alpha,
                     const std::vector<Tensor>& relation_w, const Tensor& self_w,
                     GnnActivation activation);

// Gate z = sigmoid(W_z [a; b; a*b; a-b] + b_z), output z*a + (1-z)*b. Each
// output coordinate lies between a and b; Fuse(a, a) == a exactly.
Var fuse_var(const Var& a, const Var& b, const Var& fuse_w, const Var& fuse_b);
Tensor fuse(const Tensor& a, const Tensor& b, const Tensor& fuse_w, const Tensor& fuse_b);

// Stack: g^0 = h; per layer, alpha from g^(l-1), aggregate, then fuse with
// g^(l-1). Returns g^(L).
Var gnn_forward(const Var& h, const DialogueGraph& graph, Binder& bind, const GnnHandles& gnn);

} // namespace erc
