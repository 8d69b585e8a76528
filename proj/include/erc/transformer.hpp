#pragma once

#include <vector>

#include "erc/autograd.hpp"
#include "erc/params.hpp"
#include "erc/tensor.hpp"

namespace erc {

// Two-stream conversational transformer. Every head attends twice over the
// same q/k/v projections: once over the whole dialogue (inter stream) and
// once restricted to same-speaker positions by an additive -inf mask (intra
// stream). The two d-wide results are concatenated per head, heads are
// concatenated and projected back to d_model, then LayerNorm(FFN(.)).

// NxN, 0 where speakers match (diagonal included), -inf elsewhere.
Tensor build_speaker_mask(const std::vector<int>& speakers);

struct TransformerDims {
    int layers = 1;
    int heads = 8;
    int head_dim = 0;    // 0: floor(d_model / heads)
    int d_model = 300;
    int d_ff = 300;
    bool residual = false;
    bool single_stream = false; // ablation: unmasked stream only, 2d-wide values
    double dropout = 0.1;
};

struct TransformerHandles {
    TransformerDims dims;
    int in_proj = -1; // only when the input width differs from d_model
    struct Layer {
        std::vector<int> wq, wk, wv;
        int wo = -1;
        int ff_w1 = -1, ff_b1 = -1, ff_w2 = -1, ff_b2 = -1;
        int ln_g = -1, ln_b = -1;
    };
    std::vector<Layer> layers;
};

TransformerHandles register_transformer_params(ParamSet& ps, const TransformerDims& dims, int input_width, Rng& rng);

// Optional capture of per-layer internals for tests and diagnostics.
struct TransformerTrace {
    struct Layer {
        std::vector<Tensor> inter_attn; // per head, NxN rows sum to 1
        std::vector<Tensor> intra_attn; // per head, masked entries exactly 0
        std::vector<Tensor> intra_out;  // per head, Nxd
    };
    std::vector<Layer> layers;
};

// One encoder layer over H (N x d_model).
Var transformer_layer(const Var& H, const Tensor& speaker_mask, Binder& bind,
                      const TransformerHandles& tf, int layer, Rng* dropout_rng,
                      TransformerTrace* trace = nullptr);

// Full stack; input is N x input_width utterance features. dropout_rng null
// disables dropout (evaluation / gradient checking).
Var transformer_forward(const Var& U, const std::vector<int>& speakers, Binder& bind,
                        const TransformerHandles& tf, Rng* dropout_rng,
                        TransformerTrace* trace = nullptr);

// Inverted-dropout mask with keep probability 1-rate, entries 0 or 1/(1-rate).
Tensor dropout_mask(const std::vector<int>& shape, double rate, Rng& rng);

} // namespace erc
