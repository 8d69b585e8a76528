#pragma once

#include <utility>
#include <vector>

#include "erc/autograd.hpp"
#include "erc/tensor.hpp"

namespace erc {

// Linear-chain CRF over K tags with two extra states: START = K, STOP = K+1.
// The transition matrix T is (K+2)x(K+2); entries into START and out of STOP
// are unusable and held at -inf by mask_transitions. The emission matrix Q is
// n x K.

inline int crf_start(int num_tags) { return num_tags; }
inline int crf_stop(int num_tags) { return num_tags + 1; }

// Returns a copy of T with -inf written into the unusable entries (column
// START and row STOP). Trainable storage stays finite; this produces the
// contract form consumed by the scoring functions.
Tensor mask_transitions(const Tensor& T, int num_tags);

// (K+2)x(K+2) additive mask: 0 at usable entries, -inf at unusable ones.
Tensor transition_boundary_mask(int num_tags);

// Score of one tag sequence, Eq.-order summation: boundary and chain
// transition terms first (i = 0..n), then emission terms (i = 1..n). The
// enumeration oracle uses the same order so tie-free comparisons are exact.
double sequence_score(const Tensor& Q, const Tensor& T, const std::vector<int>& tags);
Var sequence_score_var(const Var& Q, const Var& T, const std::vector<int>& tags);

// log sum over all K^n sequences of exp(score), via the forward algorithm in
// log space.
double log_partition(const Tensor& Q, const Tensor& T);
Var log_partition_var(const Var& Q, const Var& T);

// Negative log-likelihood of the gold sequence: log_partition - score(gold).
double crf_nll(const Tensor& Q, const Tensor& T, const std::vector<int>& gold);
Var crf_nll_var(const Var& Q, const Var& T, const std::vector<int>& gold);

// Argmax decode. Among score ties the lexicographically smallest sequence is
// returned (the selection pass picks the lowest tag index at every step).
// The reported score is sequence_score of the returned sequence.
std::pair<std::vector<int>, double> viterbi(const Tensor& Q, const Tensor& T);

} // namespace erc
