#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "erc/corpus.hpp"
#include "erc/crf.hpp"
#include "erc/encoder.hpp"
#include "erc/gnn.hpp"
#include "erc/graph.hpp"
#include "erc/params.hpp"
#include "erc/transformer.hpp"

namespace erc {

struct ModelConfig {
    // widths
    int d_emb = 300;   // word-vector width
    int d_u = 300;     // utterance feature width
    int d_model = 300; // contextual width
    int d_ff = 300;
    // encoder
    std::vector<int> conv_kernels = {3, 4, 5};
    int conv_filters = 100;
    bool train_embeddings = false;
    // transformer
    int tsct_heads = 8;
    int tsct_head_dim = 0; // 0: floor(d_model / heads)
    int tsct_layers = 1;
    bool tsct_residual = false;
    // graph network
    int gnn_layers = 2;
    int gnn_attn_width = 64;
    int gnn_attn_heads = 3;
    std::string gnn_activation = "relu";
    int window_past = 10;
    int window_future = 10;
    // regularization / optimization
    double dropout = 0.1;
    double lr_transformer = 1e-4;
    double lr_gnn = 2e-3;
    double lr_crf = 2e-2;
    int warmup_steps = 400;
    double weight_decay = 0.01;
    double grad_clip = 5.0;
    int epochs = 50;
    int batch_size = 4;
    int patience = 10;
    uint64_t seed = 1;
    std::vector<uint64_t> seeds; // multi-run averaging; empty = just `seed`
    // ablations
    bool use_tsct = true;
    bool use_pag = true;
    bool use_crf = true;
    bool raw_softmax_emissions = false;
    // metrics
    std::string micro_exclude_label; // empty = none

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j); // unknown keys rejected
};

// Dialogue resolved against the vocabularies and embedding table.
struct EncodedDialogue {
    std::string id;
    std::vector<std::vector<int>> token_ids; // per turn; empty when features given
    std::optional<Tensor> features;          // n x d_u precomputed
    std::vector<int> speakers;               // dataset ids, UNK mapped
    std::vector<int> labels;                 // -1 when absent
    int length() const { return static_cast<int>(speakers.size()); }
};

struct PipelineOut {
    Var emissions; // n x K (log space unless raw_softmax_emissions)
    Var h;         // transformer features
    Var g;         // graph features (== h when use_pag is off)
    DialogueGraph graph;
};

class Model {
public:
    Model(ModelConfig config, CorpusVocabs vocabs, EmbeddingTable embeddings);

    // Rebuild from checkpoint state: parameters assigned afterwards.
    static Model restore(ModelConfig config, CorpusVocabs vocabs, int embed_rows);

    EncodedDialogue encode_dialogue(const Dialogue& d, bool require_labels) const;

    PipelineOut forward(const EncodedDialogue& d, Binder& bind, Rng* dropout_rng) const;
    Var loss(const PipelineOut& out, const std::vector<int>& gold, Binder& bind) const;

    // dropout-off forward + decode
    std::vector<int> predict(const EncodedDialogue& d) const;
    double dialogue_loss(const EncodedDialogue& d); // dropout off, no grads

    const ModelConfig& config() const { return cfg_; }
    const CorpusVocabs& vocabs() const { return vocabs_; }
    const RelationVocab& relations() const { return relations_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    const EmbeddingTable& embeddings() const { return embeddings_; }
    void set_embedding_vocab(std::unordered_map<std::string, int> vocab) { embeddings_.vocab = std::move(vocab); }
    int num_labels() const { return vocabs_.labels.size(); }

    Tensor transitions() const; // masked (K+2)x(K+2), -inf at unusable entries

private:
    void build_params(Rng& rng);

    ModelConfig cfg_;
    CorpusVocabs vocabs_;
    EmbeddingTable embeddings_; // vocab map; the matrix itself lives in params_
    RelationVocab relations_;
    ParamSet params_;
    EncoderHandles enc_;
    TransformerHandles tf_;
    GnnHandles gnn_;
    int emit_w_ = -1, emit_b_ = -1, trans_ = -1;
};

} // namespace erc
