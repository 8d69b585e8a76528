#pragma once

#include <vector>

#include "erc/autograd.hpp"
#include "erc/tensor.hpp"

namespace erc {

// Directed edge src -> dst. offset = src - dst (signed, in [-past, future]).
// relation indexes the dataset-level relation vocabulary.
struct GraphEdge {
    int src = 0;
    int dst = 0;
    int relation = 0;
    int offset = 0;
};

// Relation vocabulary shared across dialogues: one id per (source speaker,
// clipped distance) pair plus a reserved self relation at the end.
struct RelationVocab {
    int speakers = 0;   // dataset speaker count (incl. UNK when used)
    int max_window = 0; // max(past, future)

    int non_self_count() const { return speakers * max_window; }
    int count() const { return non_self_count() + 1; }
    int self_id() const { return non_self_count(); }
    int id(int src_speaker, int distance) const { return src_speaker * max_window + (distance - 1); }
};

struct DialogueGraph {
    int n = 0;
    int past = 0;
    int future = 0;
    RelationVocab relations;
    std::vector<GraphEdge> edges; // sorted by (dst, src)

    // NxN, 0 where edge (j -> i) exists at entry [i][j], -inf elsewhere.
    // Row i is the in-neighborhood of target i (self included).
    Tensor edge_mask;
    // NxN row-major index into the position table, -1 at non-edges.
    std::vector<int> offset_index;

    int in_degree(int target) const;
};

// Window rule: edge (j -> i) exists iff -past <= (j - i) <= future. Self
// loops carry the reserved self relation and offset 0.
DialogueGraph build_graph(int n, const std::vector<int>& speakers, int past, int future,
                          const RelationVocab& relations);

// Row index into the position embedding table for a signed offset. Offsets
// -past..-1 map to 0..past-1, offsets 1..future to past..past+future-1, and
// 0 to the dedicated final row.
int position_row(int offset, int past, int future);
inline int position_rows(int past, int future) { return past + future + 1; }

// Per-head parameters of the edge attention (Eq. style: one transform and
// one 2F' scoring vector per head; the position table is shared).
struct EdgeAttentionHead {
    Tensor W; // F x F'
    Tensor a; // 2F' x 1
};

// Scalar logit for a single edge: LeakyReLU(a^T [W g_i || (W g_j + beta)]),
// beta the position-table row for the signed offset. g_i is the target
// feature, g_j the source. Slope 0.2.
double edge_logit(const Tensor& g_target, const Tensor& g_source, int offset, int past, int future,
                  const Tensor& W, const Tensor& a, const Tensor& position_table);

struct EdgeWeights {
    Tensor alpha; // NxN dense, alpha[i][j] = weight of edge j->i, 0 at non-edges
    double edge_alpha(int src, int dst) const { return alpha.at(dst, src); }
};

// Per-target softmax over in-edge logits, self loop normalized jointly.
// Multi-head logits are averaged post-softmax into a single weight per edge.
EdgeWeights edge_weights(const Tensor& features, const DialogueGraph& graph,
                         const std::vector<EdgeAttentionHead>& heads, const Tensor& position_table);

// Differentiable path used by the graph network; `heads` / `position_table`
// are tape leaves. Returns the averaged NxN attention matrix.
struct EdgeAttentionVars {
    std::vector<Var> W; // per head
    std::vector<Var> a; // per head
    Var position_table;
};
Var edge_weights_var(const Var& features, const DialogueGraph& graph, const EdgeAttentionVars& attn);

} // namespace erc
