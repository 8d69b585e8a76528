#include "erc/graph.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

namespace erc {

namespace {
const double kNegInf = -std::numeric_limits<double>::infinity();
}

int DialogueGraph::in_degree(int target) const {
    int deg = 0;
    for (const auto& e : edges) {
        if (e.dst == target) ++deg;
    }
    return deg;
}

int position_row(int offset, int past, int future) {
    if (offset == 0) return past + future;
    if (offset < 0) {
        if (offset < -past) throw NumericError("position_row: offset " + std::to_string(offset) + " below window");
        return offset + past;
    }
    if (offset > future) throw NumericError("position_row: offset " + std::to_string(offset) + " above window");
    return past + offset - 1;
}

DialogueGraph build_graph(int n, const std::vector<int>& speakers, int past, int future,
                          const RelationVocab& relations) {
    if (n < 1) throw NumericError("build_graph: empty dialogue");
    if (static_cast<int>(speakers.size()) != n) throw NumericError("build_graph: speaker count mismatch");
    if (past < 0 || future < 0) throw NumericError("build_graph: negative window");

    DialogueGraph g;
    g.n = n;
    g.past = past;
    g.future = future;
    g.relations = relations;
    g.edge_mask = Tensor::full({n, n}, kNegInf);
    g.offset_index.assign(static_cast<size_t>(n) * n, -1);

    for (int dst = 0; dst < n; ++dst) {
        for (int src = 0; src < n; ++src) {
            int delta = src - dst;
            if (delta < -past || delta > future) continue;
            GraphEdge e;
            e.src = src;
            e.dst = dst;
            e.offset = delta;
            if (src == dst) {
                e.relation = relations.self_id();
            } else {
                int speaker = speakers[src];
                if (speaker < 0 || speaker >= relations.speakers) {
                    throw NumericError("build_graph: speaker id " + std::to_string(speaker) +
                                       " outside relation vocabulary of " + std::to_string(relations.speakers));
                }
                e.relation = relations.id(speaker, std::abs(delta));
            }
            g.edges.push_back(e);
            g.edge_mask.at(dst, src) = 0.0;
            g.offset_index[static_cast<size_t>(dst) * n + src] = position_row(delta, past, future);
        }
    }
    return g;
}

double edge_logit(const Tensor& g_target, const Tensor& g_source, int offset, int past, int future,
                  const Tensor& W, const Tensor& a, const Tensor& position_table) {
    int fprime = W.cols();
    if (a.size() != 2 * fprime) {
        throw NumericError("edge_logit: scoring vector " + a.shape_str() + " does not match 2F' = " +
                           std::to_string(2 * fprime));
    }
    int row = position_row(offset, past, future);
    Tensor wt = matmul(g_target, W);  // 1 x F'
    Tensor ws = matmul(g_source, W);  // 1 x F'
    double pre = 0.0;
    for (int j = 0; j < fprime; ++j) pre += a[j] * wt[j];
    for (int j = 0; j < fprime; ++j) pre += a[fprime + j] * (ws[j] + position_table.at(row, j));
    return pre >= 0.0 ? pre : 0.2 * pre;
}

Var edge_weights_var(const Var& features, const DialogueGraph& graph, const EdgeAttentionVars& attn) {
    int n = graph.n;
    std::vector<Var> per_head;
    for (size_t h = 0; h < attn.W.size(); ++h) {
        Var projected = matmul(features, attn.W[h]);              // N x F'
        int fprime = projected->val.cols();
        Var a_target = slice_rows(attn.a[h], 0, fprime);          // F' x 1
        Var a_source = slice_rows(attn.a[h], fprime, fprime);     // F' x 1
        Var target_term = matmul(projected, a_target);            // N x 1
        Var source_term = matmul(projected, a_source);            // N x 1
        // per-offset contribution of the position row: a_source . E_p[row]
        Var offset_vals = transpose(matmul(attn.position_table, a_source)); // 1 x rows
        Var logits = gather_matrix(offset_vals, graph.offset_index, n, n);
        logits = add_colvec(logits, target_term);             // + target term down row i
        logits = add_rowvec(logits, transpose(source_term));  // + source term along column j
        logits = leaky_relu(logits, 0.2);
        per_head.push_back(masked_softmax_rows(logits, graph.edge_mask));
    }
    Var sum = per_head[0];
    for (size_t h = 1; h < per_head.size(); ++h) sum = add(sum, per_head[h]);
    return scale(sum, 1.0 / static_cast<double>(per_head.size()));
}

EdgeWeights edge_weights(const Tensor& features, const DialogueGraph& graph,
                         const std::vector<EdgeAttentionHead>& heads, const Tensor& position_table) {
    EdgeAttentionVars attn;
    for (const auto& h : heads) {
        attn.W.push_back(constant(h.W));
        attn.a.push_back(constant(h.a));
    }
    attn.position_table = constant(position_table);
    Var alpha = edge_weights_var(constant(features), graph, attn);
    return EdgeWeights{alpha->val};
}

} // namespace erc
