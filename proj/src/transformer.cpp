#include "erc/transformer.hpp"

#include <cmath>
#include <limits>

namespace erc {

namespace {
const double kNegInf = -std::numeric_limits<double>::infinity();
}

Tensor build_speaker_mask(const std::vector<int>& speakers) {
    int n = static_cast<int>(speakers.size());
    if (n < 1) throw NumericError("build_speaker_mask: empty dialogue");
    Tensor m({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m.at(i, j) = speakers[i] == speakers[j] ? 0.0 : kNegInf;
    return m;
}

Tensor dropout_mask(const std::vector<int>& shape, double rate, Rng& rng) {
    Tensor m(shape);
    double keep = 1.0 - rate;
    for (double& x : m.v) x = rng.uniform() < keep ? 1.0 / keep : 0.0;
    return m;
}

TransformerHandles register_transformer_params(ParamSet& ps, const TransformerDims& dims, int input_width, Rng& rng) {
    TransformerHandles tf;
    tf.dims = dims;
    if (tf.dims.head_dim <= 0) tf.dims.head_dim = std::max(1, dims.d_model / dims.heads);
    int d = tf.dims.head_dim;
    int dv = dims.single_stream ? 2 * d : d; // matched concat width for the ablation

    if (input_width != dims.d_model) {
        tf.in_proj = ps.add("tsct.in_proj.w", xavier_uniform(input_width, dims.d_model, rng), ParamGroup::Transformer);
    }
    for (int l = 0; l < dims.layers; ++l) {
        TransformerHandles::Layer layer;
        std::string base = "tsct.l" + std::to_string(l) + ".";
        for (int h = 0; h < dims.heads; ++h) {
            std::string hb = base + "h" + std::to_string(h) + ".";
            layer.wq.push_back(ps.add(hb + "wq", xavier_uniform(dims.d_model, d, rng), ParamGroup::Transformer));
            layer.wk.push_back(ps.add(hb + "wk", xavier_uniform(dims.d_model, d, rng), ParamGroup::Transformer));
            layer.wv.push_back(ps.add(hb + "wv", xavier_uniform(dims.d_model, dv, rng), ParamGroup::Transformer));
        }
        layer.wo = ps.add(base + "wo", xavier_uniform(2 * dims.heads * d, dims.d_model, rng), ParamGroup::Transformer);
        layer.ff_w1 = ps.add(base + "ff.w1", xavier_uniform(dims.d_model, dims.d_ff, rng), ParamGroup::Transformer);
        layer.ff_b1 = ps.add(base + "ff.b1", Tensor({1, dims.d_ff}), ParamGroup::Transformer);
        layer.ff_w2 = ps.add(base + "ff.w2", xavier_uniform(dims.d_ff, dims.d_model, rng), ParamGroup::Transformer);
        layer.ff_b2 = ps.add(base + "ff.b2", Tensor({1, dims.d_model}), ParamGroup::Transformer);
        layer.ln_g = ps.add(base + "ln.g", Tensor::full({1, dims.d_model}, 1.0), ParamGroup::Transformer);
        layer.ln_b = ps.add(base + "ln.b", Tensor({1, dims.d_model}), ParamGroup::Transformer);
        tf.layers.push_back(layer);
    }
    return tf;
}

Var transformer_layer(const Var& H, const Tensor& speaker_mask, Binder& bind,
                      const TransformerHandles& tf, int layer, Rng* dropout_rng,
                      TransformerTrace* trace) {
    const auto& lp = tf.layers[layer];
    const auto& dims = tf.dims;
    int n = H->val.rows();
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dims.head_dim));

    TransformerTrace::Layer tl;
    std::vector<Var> heads;
    for (int h = 0; h < dims.heads; ++h) {
        Var q = matmul(H, bind[lp.wq[h]]);
        Var k = matmul(H, bind[lp.wk[h]]);
        Var v = matmul(H, bind[lp.wv[h]]);
        Var scores = scale(matmul(q, transpose(k)), inv_sqrt_d);

        Var inter_attn = softmax_rows(scores);
        if (trace) tl.inter_attn.push_back(inter_attn->val);
        if (dropout_rng && dims.dropout > 0.0) {
            inter_attn = mul_const(inter_attn, dropout_mask({n, n}, dims.dropout, *dropout_rng));
        }
        Var inter = matmul(inter_attn, v);

        if (dims.single_stream) {
            heads.push_back(inter);
            continue;
        }

        Var intra_attn = masked_softmax_rows(scores, speaker_mask);
        if (trace) {
            tl.intra_attn.push_back(intra_attn->val);
            tl.intra_out.push_back(matmul(intra_attn->val, v->val));
        }
        if (dropout_rng && dims.dropout > 0.0) {
            intra_attn = mul_const(intra_attn, dropout_mask({n, n}, dims.dropout, *dropout_rng));
        }
        Var intra = matmul(intra_attn, v);
        heads.push_back(concat_cols({inter, intra}));
    }
    if (trace) trace->layers.push_back(std::move(tl));

    Var multi = heads.size() == 1 ? heads[0] : concat_cols(heads);
    Var x = matmul(multi, bind[lp.wo]);
    Var hidden = relu(add_rowvec(matmul(x, bind[lp.ff_w1]), bind[lp.ff_b1]));
    Var ff = add_rowvec(matmul(hidden, bind[lp.ff_w2]), bind[lp.ff_b2]);
    if (dropout_rng && dims.dropout > 0.0) {
        ff = mul_const(ff, dropout_mask({n, dims.d_model}, dims.dropout, *dropout_rng));
    }
    if (dims.residual) ff = add(ff, x);
    return layer_norm_rows(ff, bind[lp.ln_g], bind[lp.ln_b], 1e-5);
}

Var transformer_forward(const Var& U, const std::vector<int>& speakers, Binder& bind,
                        const TransformerHandles& tf, Rng* dropout_rng, TransformerTrace* trace) {
    if (U->val.rows() != static_cast<int>(speakers.size())) {
        throw NumericError("transformer_forward: feature/speaker count mismatch");
    }
    Var h = tf.in_proj >= 0 ? matmul(U, bind[tf.in_proj]) : U;
    Tensor mask = build_speaker_mask(speakers);
    for (size_t l = 0; l < tf.layers.size(); ++l) {
        h = transformer_layer(h, mask, bind, tf, static_cast<int>(l), dropout_rng, trace);
    }
    return h;
}

} // namespace erc
