#include "erc/model.hpp"

#include <cmath>

namespace erc {

namespace {

GnnActivation parse_activation(const std::string& s) {
    if (s == "relu") return GnnActivation::Relu;
    if (s == "identity") return GnnActivation::Identity;
    if (s == "tanh") return GnnActivation::Tanh;
    throw UsageError("unknown gnn_activation: " + s);
}

} // namespace

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v <= 0) throw UsageError(std::string(name) + " must be positive");
    };
    positive(d_emb, "d_emb");
    positive(d_u, "d_u");
    positive(d_model, "d_model");
    positive(d_ff, "d_ff");
    positive(conv_filters, "conv_filters");
    positive(tsct_heads, "tsct_heads");
    positive(batch_size, "batch_size");
    if (conv_kernels.empty()) throw UsageError("conv_kernels must be nonempty");
    for (int k : conv_kernels) positive(k, "conv kernel");
    if (tsct_layers < 0 || gnn_layers < 0) throw UsageError("layer counts must be >= 0");
    if (window_past < 0 || window_future < 0) throw UsageError("windows must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0) throw UsageError("dropout must be in [0,1)");
    if (epochs < 0) throw UsageError("epochs must be >= 0");
    parse_activation(gnn_activation);
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json j;
    j["d_emb"] = d_emb;
    j["d_u"] = d_u;
    j["d_model"] = d_model;
    j["d_ff"] = d_ff;
    j["conv_kernels"] = conv_kernels;
    j["conv_filters"] = conv_filters;
    j["train_embeddings"] = train_embeddings;
    j["tsct_heads"] = tsct_heads;
    j["tsct_head_dim"] = tsct_head_dim;
    j["tsct_layers"] = tsct_layers;
    j["tsct_residual"] = tsct_residual;
    j["gnn_layers"] = gnn_layers;
    j["gnn_attn_width"] = gnn_attn_width;
    j["gnn_attn_heads"] = gnn_attn_heads;
    j["gnn_activation"] = gnn_activation;
    j["window_past"] = window_past;
    j["window_future"] = window_future;
    j["dropout"] = dropout;
    j["lr_transformer"] = lr_transformer;
    j["lr_gnn"] = lr_gnn;
    j["lr_crf"] = lr_crf;
    j["warmup_steps"] = warmup_steps;
    j["weight_decay"] = weight_decay;
    j["grad_clip"] = grad_clip;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["patience"] = patience;
    j["seed"] = seed;
    j["seeds"] = seeds;
    j["use_tsct"] = use_tsct;
    j["use_pag"] = use_pag;
    j["use_crf"] = use_crf;
    j["raw_softmax_emissions"] = raw_softmax_emissions;
    j["micro_exclude_label"] = micro_exclude_label;
    return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    nlohmann::json known = c.to_json();
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.contains(it.key())) throw UsageError("unknown config key: " + it.key());
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("d_emb", c.d_emb);
    get("d_u", c.d_u);
    get("d_model", c.d_model);
    get("d_ff", c.d_ff);
    get("conv_kernels", c.conv_kernels);
    get("conv_filters", c.conv_filters);
    get("train_embeddings", c.train_embeddings);
    get("tsct_heads", c.tsct_heads);
    get("tsct_head_dim", c.tsct_head_dim);
    get("tsct_layers", c.tsct_layers);
    get("tsct_residual", c.tsct_residual);
    get("gnn_layers", c.gnn_layers);
    get("gnn_attn_width", c.gnn_attn_width);
    get("gnn_attn_heads", c.gnn_attn_heads);
    get("gnn_activation", c.gnn_activation);
    get("window_past", c.window_past);
    get("window_future", c.window_future);
    get("dropout", c.dropout);
    get("lr_transformer", c.lr_transformer);
    get("lr_gnn", c.lr_gnn);
    get("lr_crf", c.lr_crf);
    get("warmup_steps", c.warmup_steps);
    get("weight_decay", c.weight_decay);
    get("grad_clip", c.grad_clip);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("patience", c.patience);
    get("seed", c.seed);
    get("seeds", c.seeds);
    get("use_tsct", c.use_tsct);
    get("use_pag", c.use_pag);
    get("use_crf", c.use_crf);
    get("raw_softmax_emissions", c.raw_softmax_emissions);
    get("micro_exclude_label", c.micro_exclude_label);
    c.validate();
    return c;
}

Model::Model(ModelConfig config, CorpusVocabs vocabs, EmbeddingTable embeddings)
    : cfg_(std::move(config)), vocabs_(std::move(vocabs)), embeddings_(std::move(embeddings)) {
    cfg_.validate();
    if (embeddings_.vectors.cols() != cfg_.d_emb) {
        throw DataError("embedding width " + std::to_string(embeddings_.vectors.cols()) +
                        " does not match configured d_emb " + std::to_string(cfg_.d_emb));
    }
    relations_.speakers = vocabs_.speakers.size();
    relations_.max_window = std::max(cfg_.window_past, cfg_.window_future);
    Rng rng(cfg_.seed);
    build_params(rng);
}

Model Model::restore(ModelConfig config, CorpusVocabs vocabs, int embed_rows) {
    EmbeddingTable table;
    table.vectors = Tensor({embed_rows, config.d_emb});
    return Model(std::move(config), std::move(vocabs), std::move(table));
}

void Model::build_params(Rng& rng) {
    int table = params_.add("enc.embeddings", embeddings_.vectors, ParamGroup::Transformer,
                            cfg_.train_embeddings);
    embeddings_.vectors = Tensor(); // single source of truth in params_
    enc_ = register_encoder_params(params_, cfg_.d_emb, cfg_.conv_kernels, cfg_.conv_filters, cfg_.d_u, rng);
    enc_.table = table;

    TransformerDims td;
    td.layers = cfg_.tsct_layers;
    td.heads = cfg_.tsct_heads;
    td.head_dim = cfg_.tsct_head_dim;
    td.d_model = cfg_.d_model;
    td.d_ff = cfg_.d_ff;
    td.residual = cfg_.tsct_residual;
    td.single_stream = !cfg_.use_tsct;
    td.dropout = cfg_.dropout;
    tf_ = register_transformer_params(params_, td, cfg_.d_u, rng);

    if (cfg_.use_pag) {
        GnnDims gd;
        gd.layers = cfg_.gnn_layers;
        gd.feature_width = cfg_.d_model;
        gd.attn_width = cfg_.gnn_attn_width;
        gd.attn_heads = cfg_.gnn_attn_heads;
        gd.activation = parse_activation(cfg_.gnn_activation);
        gnn_ = register_gnn_params(params_, gd, relations_, cfg_.window_past, cfg_.window_future, rng);
    }

    int k = num_labels();
    emit_w_ = params_.add("crf.emit.w", xavier_uniform(2 * cfg_.d_model, k, rng), ParamGroup::Crf);
    emit_b_ = params_.add("crf.emit.b", Tensor({1, k}), ParamGroup::Crf);
    if (cfg_.use_crf) {
        trans_ = params_.add("crf.trans", Tensor({k + 2, k + 2}), ParamGroup::Crf);
    }
}

EncodedDialogue Model::encode_dialogue(const Dialogue& d, bool require_labels) const {
    if (d.turns.empty()) throw DataError("dialogue " + d.id + " has no turns");
    EncodedDialogue out;
    out.id = d.id;
    bool any_vector = false;
    for (const auto& t : d.turns) any_vector |= t.vector.has_value();
    if (any_vector) {
        Tensor feats({static_cast<int>(d.turns.size()), cfg_.d_u});
        for (size_t i = 0; i < d.turns.size(); ++i) {
            if (!d.turns[i].vector) {
                throw DataError("dialogue " + d.id + ": mixed text and vector turns");
            }
            const auto& vec = *d.turns[i].vector;
            if (static_cast<int>(vec.size()) != cfg_.d_u) {
                throw DataError("dialogue " + d.id + ": feature width " + std::to_string(vec.size()) +
                                " does not match d_u " + std::to_string(cfg_.d_u));
            }
            for (int j = 0; j < cfg_.d_u; ++j) feats.at(static_cast<int>(i), j) = vec[j];
        }
        out.features = std::move(feats);
    }
    for (const auto& t : d.turns) {
        if (!any_vector) out.token_ids.push_back(token_ids(tokenize(t.text), embeddings_));
        int sp = vocabs_.speakers.find(t.speaker);
        out.speakers.push_back(sp >= 0 ? sp : vocabs_.speakers.size() - 1); // UNK
        if (t.label) {
            int lab = vocabs_.labels.find(*t.label);
            if (lab < 0) throw DataError("dialogue " + d.id + ": unknown label \"" + *t.label + "\"");
            out.labels.push_back(lab);
        } else {
            if (require_labels) throw DataError("dialogue " + d.id + ": missing gold label");
            out.labels.push_back(-1);
        }
    }
    return out;
}

PipelineOut Model::forward(const EncodedDialogue& d, Binder& bind, Rng* dropout_rng) const {
    int n = d.length();

    Var u;
    if (d.features) {
        u = constant(*d.features);
    } else {
        std::vector<Var> rows;
        rows.reserve(n);
        for (const auto& ids : d.token_ids) rows.push_back(encode_utterance_var(ids, bind, enc_));
        u = n == 1 ? rows[0] : concat_rows(rows);
    }

    PipelineOut out;
    out.h = transformer_forward(u, d.speakers, bind, tf_, dropout_rng);
    out.graph = build_graph(n, d.speakers, cfg_.window_past, cfg_.window_future, relations_);
    out.g = cfg_.use_pag ? gnn_forward(out.h, out.graph, bind, gnn_) : out.h;

    Var combined = concat_cols({out.h, out.g});
    Var logits = add_rowvec(matmul(combined, bind[emit_w_]), bind[emit_b_]);
    out.emissions = cfg_.raw_softmax_emissions ? softmax_rows(logits) : log_softmax_rows(logits);
    return out;
}

Var Model::loss(const PipelineOut& out, const std::vector<int>& gold, Binder& bind) const {
    for (int y : gold) {
        if (y < 0 || y >= num_labels()) throw DataError("loss: gold label out of range");
    }
    if (cfg_.use_crf) {
        Var masked = add(bind[trans_], constant(transition_boundary_mask(num_labels())));
        return crf_nll_var(out.emissions, masked, gold);
    }
    // independent per-utterance cross-entropy (sum over turns)
    Var logq = cfg_.raw_softmax_emissions ? log_softmax_rows(out.emissions) : out.emissions;
    Var s;
    for (size_t i = 0; i < gold.size(); ++i) {
        Var term = pick(logq, static_cast<int>(i), gold[i]);
        s = s ? add(s, term) : term;
    }
    return scale(s, -1.0);
}

Tensor Model::transitions() const {
    if (!cfg_.use_crf) throw NumericError("transitions: CRF disabled");
    return mask_transitions(params_[trans_].value, num_labels());
}

std::vector<int> Model::predict(const EncodedDialogue& d) const {
    Binder bind(const_cast<ParamSet&>(params_), false);
    PipelineOut out = forward(d, bind, nullptr);
    if (cfg_.use_crf) {
        Tensor masked = mask_transitions(params_[trans_].value, num_labels());
        return viterbi(out.emissions->val, masked).first;
    }
    std::vector<int> pred(d.length(), 0);
    for (int i = 0; i < d.length(); ++i) {
        int best = 0;
        for (int k = 1; k < num_labels(); ++k) {
            if (out.emissions->val.at(i, k) > out.emissions->val.at(i, best)) best = k;
        }
        pred[i] = best;
    }
    return pred;
}

double Model::dialogue_loss(const EncodedDialogue& d) {
    Binder bind(params_, false);
    PipelineOut out = forward(d, bind, nullptr);
    return loss(out, d.labels, bind)->val[0];
}

} // namespace erc
