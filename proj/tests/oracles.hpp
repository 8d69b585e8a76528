#pragma once

// Brute-force reference implementations used only by tests. Nothing here
// shares code with the production path beyond the Tensor container.

#include <tuple>
#include <vector>

#include "erc/graph.hpp"
#include "erc/tensor.hpp"

namespace erc::oracles {

struct CrfEnumeration {
    double log_partition = 0.0;
    std::vector<int> best_sequence;
    double best_score = 0.0;
};

// Exhaustive scoring of all K^n tag sequences (guarded at 1e6). Ties on the
// best score keep the lexicographically smallest sequence. Scores are summed
// in the canonical order: boundary/chain transitions first, then emissions.
CrfEnumeration crf_enumerate(const Tensor& Q, const Tensor& T);

// Literal dense aggregation: loops over every relation and every node pair.
Tensor dense_rgcn(const Tensor& g, const DialogueGraph& graph, const Tensor& alpha,
                  const std::vector<Tensor>& relation_w, const Tensor& self_w, bool relu_activation);

struct OracleEdge {
    int src, dst, relation, offset;
    bool operator==(const OracleEdge& o) const {
        return src == o.src && dst == o.dst && relation == o.relation && offset == o.offset;
    }
    bool operator<(const OracleEdge& o) const {
        return std::tie(dst, src, relation, offset) < std::tie(o.dst, o.src, o.relation, o.offset);
    }
};

// O(N^2) pair scan applying the window rule, relation typed by (source
// speaker, distance) with the self relation last in the vocabulary.
std::vector<OracleEdge> enumerate_edges(int n, const std::vector<int>& speakers, int past, int future,
                                        int vocab_speakers);

// Plain-loop attention row for one query: softmax(q k^T / sqrt(d)) with an
// optional allow-list of key positions.
std::vector<double> naive_attention_row(const Tensor& H, const Tensor& Wq, const Tensor& Wk, int query,
                                        const std::vector<bool>& allowed);

} // namespace erc::oracles
