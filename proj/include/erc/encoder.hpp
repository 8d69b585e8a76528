#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "erc/autograd.hpp"
#include "erc/params.hpp"
#include "erc/tensor.hpp"

namespace erc {

enum class OovPolicy { ZeroRow, TrainableRow };

// token -> row lookup over a fixed word-vector matrix. Row 0 is reserved for
// OOV (zero by default).
struct EmbeddingTable {
    std::unordered_map<std::string, int> vocab;
    Tensor vectors; // V x width, row 0 = OOV
    OovPolicy oov = OovPolicy::ZeroRow;

    int width() const { return vectors.cols(); }
    int lookup(const std::string& token) const {
        auto it = vocab.find(token);
        return it == vocab.end() ? 0 : it->second;
    }
};

// lowercase, split on anything outside [a-z0-9']; empty text yields the OOV
// sentinel so every utterance has at least one token
std::vector<std::string> tokenize(const std::string& text);

// "token v1 ... vD" text lines; keeps only tokens present in `keep` when it
// is nonempty. Width is taken from the first line.
EmbeddingTable load_word_vectors(const std::string& path, const std::vector<std::string>& keep = {});
void save_word_vectors(const EmbeddingTable& table, const std::vector<std::string>& order, const std::string& path);

Tensor embed_tokens(const std::vector<std::string>& tokens, const EmbeddingTable& table);
std::vector<int> token_ids(const std::vector<std::string>& tokens, const EmbeddingTable& table);

// Conv filters over token windows (one weight per kernel size), max over
// time, concat, then FC + ReLU down to the utterance width.
struct EncoderHandles {
    int table = -1; // embedding matrix (may be frozen)
    std::vector<int> conv_w;
    std::vector<int> conv_b;
    int fc_w = -1;
    int fc_b = -1;
    std::vector<int> kernels;
};

EncoderHandles register_encoder_params(ParamSet& ps, int embed_width, const std::vector<int>& kernels,
                                       int filters, int out_width, Rng& rng);

// One utterance: ids into the embedding table -> 1 x out_width feature.
Var encode_utterance_var(const std::vector<int>& ids, Binder& bind, const EncoderHandles& enc);

// Plain-value convenience used by unit tests: single kernel spelled out.
Tensor encode_utterance(const Tensor& token_matrix, const std::vector<int>& kernels,
                        const std::vector<Tensor>& conv_w, const std::vector<Tensor>& conv_b,
                        const Tensor& fc_w, const Tensor& fc_b);

// JSONL rows {"dialogue_id", "turn", "vector": [...]}; returns per-dialogue
// feature matrices in corpus order. Count or width mismatches raise
// DataError naming expected vs found.
std::vector<Tensor> load_precomputed(const std::string& path, const std::vector<std::string>& dialogue_ids,
                                     const std::vector<int>& turn_counts, int width);
void save_precomputed(const std::string& path, const std::vector<std::string>& dialogue_ids,
                      const std::vector<Tensor>& features);

} // namespace erc
