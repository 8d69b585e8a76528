#include "erc/crf.hpp"

#include <cmath>
#include <limits>

namespace erc {

namespace {

const double kNegInf = -std::numeric_limits<double>::infinity();

int tag_count(const Tensor& Q) {
    if (Q.rank() != 2 || Q.rows() < 1) throw NumericError("crf: emission matrix must be n x K, got " + Q.shape_str());
    return Q.cols();
}

void check_transitions(const Tensor& T, int num_tags) {
    if (T.rank() != 2 || T.rows() != num_tags + 2 || T.cols() != num_tags + 2) {
        throw NumericError("crf: transition matrix " + T.shape_str() + " does not match K+2 = " +
                           std::to_string(num_tags + 2));
    }
}

void check_tags(const std::vector<int>& tags, int n, int num_tags) {
    if (static_cast<int>(tags.size()) != n) {
        throw NumericError("crf: tag sequence length " + std::to_string(tags.size()) + " vs " + std::to_string(n));
    }
    for (int t : tags) {
        if (t < 0 || t >= num_tags) throw NumericError("crf: tag " + std::to_string(t) + " out of range");
    }
}

} // namespace

Tensor mask_transitions(const Tensor& T, int num_tags) {
    check_transitions(T, num_tags);
    Tensor out = T;
    int start = crf_start(num_tags), stop = crf_stop(num_tags);
    for (int i = 0; i < num_tags + 2; ++i) {
        out.at(i, start) = kNegInf; // into START
        out.at(stop, i) = kNegInf;  // out of STOP
    }
    return out;
}

Tensor transition_boundary_mask(int num_tags) {
    return mask_transitions(Tensor({num_tags + 2, num_tags + 2}), num_tags);
}

Var sequence_score_var(const Var& Q, const Var& T, const std::vector<int>& tags) {
    int n = Q->val.rows();
    int k = tag_count(Q->val);
    check_transitions(T->val, k);
    check_tags(tags, n, k);
    int start = crf_start(k), stop = crf_stop(k);

    Var s = pick(T, start, tags[0]);
    for (int i = 0; i + 1 < n; ++i) s = add(s, pick(T, tags[i], tags[i + 1]));
    s = add(s, pick(T, tags[n - 1], stop));
    for (int i = 0; i < n; ++i) s = add(s, pick(Q, i, tags[i]));
    return s;
}

double sequence_score(const Tensor& Q, const Tensor& T, const std::vector<int>& tags) {
    return sequence_score_var(constant(Q), constant(T), tags)->val[0];
}

Var log_partition_var(const Var& Q, const Var& T) {
    int n = Q->val.rows();
    int k = tag_count(Q->val);
    check_transitions(T->val, k);
    int start = crf_start(k), stop = crf_stop(k);

    Var from_start = slice_cols(slice_rows(T, start, 1), 0, k);   // 1 x K
    Var chain_t = transpose(slice_cols(slice_rows(T, 0, k), 0, k)); // K x K, [j][i] = T[i][j]
    Var to_stop = transpose(slice_cols(slice_rows(T, 0, k), stop, 1)); // 1 x K

    Var alpha = add(from_start, slice_rows(Q, 0, 1)); // 1 x K
    for (int t = 1; t < n; ++t) {
        // next[j] = logsumexp_i(alpha[i] + T[i][j]) + Q[t][j]
        Var scores = add_rowvec(chain_t, alpha);       // row j, col i
        Var lse = transpose(logsumexp_rows(scores));   // 1 x K
        alpha = add(lse, slice_rows(Q, t, 1));
    }
    return logsumexp_rows(add(alpha, to_stop));
}

double log_partition(const Tensor& Q, const Tensor& T) {
    return log_partition_var(constant(Q), constant(T))->val[0];
}

Var crf_nll_var(const Var& Q, const Var& T, const std::vector<int>& gold) {
    return sub(log_partition_var(Q, T), sequence_score_var(Q, T, gold));
}

double crf_nll(const Tensor& Q, const Tensor& T, const std::vector<int>& gold) {
    return crf_nll_var(constant(Q), constant(T), gold)->val[0];
}

std::pair<std::vector<int>, double> viterbi(const Tensor& Q, const Tensor& T) {
    int n = Q.rows();
    int k = tag_count(Q);
    check_transitions(T, k);
    int start = crf_start(k), stop = crf_stop(k);

    // suffix[t][y]: best score of positions t..n-1 given tag y at t, plus the
    // stop transition. Selection then runs left to right, taking the lowest
    // index among maximizers, which yields the lexicographically smallest
    // optimal sequence.
    std::vector<std::vector<double>> suffix(n, std::vector<double>(k, 0.0));
    for (int y = 0; y < k; ++y) suffix[n - 1][y] = Q.at(n - 1, y) + T.at(y, stop);
    for (int t = n - 2; t >= 0; --t) {
        for (int y = 0; y < k; ++y) {
            double best = kNegInf;
            for (int y2 = 0; y2 < k; ++y2) {
                best = std::max(best, T.at(y, y2) + suffix[t + 1][y2]);
            }
            suffix[t][y] = Q.at(t, y) + best;
        }
    }

    std::vector<int> tags(n, 0);
    double best = kNegInf;
    for (int y = 0; y < k; ++y) {
        double s = T.at(start, y) + suffix[0][y];
        if (s > best) {
            best = s;
            tags[0] = y;
        }
    }
    for (int t = 1; t < n; ++t) {
        double best_step = kNegInf;
        for (int y = 0; y < k; ++y) {
            double s = T.at(tags[t - 1], y) + suffix[t][y];
            if (s > best_step) {
                best_step = s;
                tags[t] = y;
            }
        }
    }
    return {tags, sequence_score(Q, T, tags)};
}

} // namespace erc
