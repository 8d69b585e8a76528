#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace erc::oracles {

CrfEnumeration crf_enumerate(const Tensor& Q, const Tensor& T) {
    int n = Q.rows();
    int k = Q.cols();
    int start = k, stop = k + 1;
    double total = 1.0;
    for (int i = 0; i < n; ++i) {
        total *= k;
        if (total > 1e6) throw std::runtime_error("crf_enumerate: instance too large");
    }

    auto score_of = [&](const std::vector<int>& y) {
        double s = T.at(start, y[0]);
        for (int i = 0; i + 1 < n; ++i) s += T.at(y[i], y[i + 1]);
        s += T.at(y[n - 1], stop);
        for (int i = 0; i < n; ++i) s += Q.at(i, y[i]);
        return s;
    };

    // first pass: max (for the stable logsumexp) and argmax
    std::vector<int> y(n, 0);
    CrfEnumeration out;
    out.best_sequence = y;
    out.best_score = score_of(y);
    double max_score = out.best_score;
    auto advance = [&]() {
        for (int i = n - 1; i >= 0; --i) {
            if (++y[i] < k) return true;
            y[i] = 0;
        }
        return false;
    };
    while (advance()) {
        double s = score_of(y);
        if (s > out.best_score) {
            out.best_score = s;
            out.best_sequence = y;
        }
        max_score = std::max(max_score, s);
    }

    // second pass: exp-sum against the max
    std::fill(y.begin(), y.end(), 0);
    double sum = std::exp(score_of(y) - max_score);
    while (advance()) sum += std::exp(score_of(y) - max_score);
    out.log_partition = max_score + std::log(sum);
    return out;
}

Tensor dense_rgcn(const Tensor& g, const DialogueGraph& graph, const Tensor& alpha,
                  const std::vector<Tensor>& relation_w, const Tensor& self_w, bool relu_activation) {
    int n = graph.n;
    int f = g.cols();
    int relations = static_cast<int>(relation_w.size());

    // adjacency-by-relation and per-(target, relation) neighbor counts
    std::vector<std::vector<std::vector<bool>>> has(relations,
        std::vector<std::vector<bool>>(n, std::vector<bool>(n, false)));
    for (const auto& e : graph.edges) {
        if (e.src == e.dst) continue;
        has[e.relation][e.dst][e.src] = true;
    }

    Tensor out({n, f});
    for (int i = 0; i < n; ++i) {
        std::vector<double> acc(f, 0.0);
        for (int r = 0; r < relations; ++r) {
            int c = 0;
            for (int j = 0; j < n; ++j) c += has[r][i][j] ? 1 : 0;
            if (c == 0) continue;
            for (int j = 0; j < n; ++j) {
                if (!has[r][i][j]) continue;
                double w = alpha.at(i, j) / c;
                for (int col = 0; col < f; ++col) {
                    double dot = 0.0;
                    for (int row = 0; row < f; ++row) dot += g.at(j, row) * relation_w[r].at(row, col);
                    acc[col] += w * dot;
                }
            }
        }
        for (int col = 0; col < f; ++col) {
            double dot = 0.0;
            for (int row = 0; row < f; ++row) dot += g.at(i, row) * self_w.at(row, col);
            acc[col] += alpha.at(i, i) * dot;
        }
        for (int col = 0; col < f; ++col) {
            out.at(i, col) = relu_activation ? std::max(0.0, acc[col]) : acc[col];
        }
    }
    return out;
}

std::vector<OracleEdge> enumerate_edges(int n, const std::vector<int>& speakers, int past, int future,
                                        int vocab_speakers) {
    int max_window = std::max(past, future);
    std::vector<OracleEdge> edges;
    for (int dst = 0; dst < n; ++dst) {
        for (int src = 0; src < n; ++src) {
            int delta = src - dst;
            if (delta < -past || delta > future) continue;
            OracleEdge e{src, dst, 0, delta};
            if (src == dst) {
                e.relation = vocab_speakers * max_window;
            } else {
                e.relation = speakers[src] * max_window + (std::abs(delta) - 1);
            }
            edges.push_back(e);
        }
    }
    return edges;
}

std::vector<double> naive_attention_row(const Tensor& H, const Tensor& Wq, const Tensor& Wk, int query,
                                        const std::vector<bool>& allowed) {
    int n = H.rows();
    int d = Wq.cols();
    auto project = [&](int row, const Tensor& W) {
        std::vector<double> out(d, 0.0);
        for (int c = 0; c < d; ++c)
            for (int k = 0; k < H.cols(); ++k) out[c] += H.at(row, k) * W.at(k, c);
        return out;
    };
    std::vector<double> q = project(query, Wq);
    std::vector<double> logits(n, 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
        if (!allowed[j]) continue;
        std::vector<double> kj = project(j, Wk);
        double dot = 0.0;
        for (int c = 0; c < d; ++c) dot += q[c] * kj[c];
        logits[j] = dot / std::sqrt(static_cast<double>(d));
        mx = std::max(mx, logits[j]);
    }
    std::vector<double> row(n, 0.0);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        if (!allowed[j]) continue;
        row[j] = std::exp(logits[j] - mx);
        sum += row[j];
    }
    for (int j = 0; j < n; ++j) row[j] /= sum;
    return row;
}

} // namespace erc::oracles
