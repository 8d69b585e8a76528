#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "erc/tensor.hpp"

namespace erc {

// Reverse-mode tape. Every op builds a Node whose backward closure pulls the
// node's gradient into its parents; backward() walks the graph once in
// reverse topological order. Graphs are per-forward and freed when the last
// Var handle drops.
struct Node {
    Tensor val;
    Tensor grad;   // sized on first touch
    bool needs_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    Tensor& g() {
        if (grad.v.empty()) grad = Tensor::zeros(val.shape);
        return grad;
    }
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor value);
Var leaf(Tensor value, bool needs_grad = true);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_rowvec(const Var& m, const Var& r); // r is 1xC, broadcast over rows
Var add_colvec(const Var& m, const Var& c); // c is Nx1, broadcast over cols
Var scale(const Var& a, double k);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);

Var softmax_rows(const Var& a);
// mask entries are 0 (keep) or -inf (drop); dropped positions come out
// exactly 0 and receive no gradient. Kept logits are used bit-unchanged.
Var masked_softmax_rows(const Var& a, const Tensor& mask);
Var log_softmax_rows(const Var& a);
Var logsumexp_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int r0, int nrows);
Var slice_cols(const Var& a, int c0, int ncols);
Var pick(const Var& a, int i, int j); // 1x1

// Gather rows of a table (embedding lookup). Gradient scatter-adds.
Var rows_lookup(const Var& table, const std::vector<int>& ids);

// out[i] = values[idx[i]] for idx[i] >= 0, else 0. values is 1xV, idx is a
// flat row-major rows x cols index matrix.
Var gather_matrix(const Var& values, const std::vector<int>& idx, int rows, int cols);

// Unroll sliding windows of k consecutive rows into one row each; inputs
// shorter than k are zero-padded at the bottom so there is always a window.
Var im2col(const Var& a, int k);

Var colwise_max(const Var& a); // 1xC, gradient to the first argmax per column

Var mul_const(const Var& a, const Tensor& m);

// Gated mix b + z*(a-b), clamped elementwise to [min(a,b), max(a,b)].
Var fuse_mix(const Var& z, const Var& a, const Var& b);

Var sum_all(const Var& a); // 1x1

// Accumulates d(root)/d(x) into every reachable node with needs_grad. root
// must be 1x1.
void backward(const Var& root);

} // namespace erc
