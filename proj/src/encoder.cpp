#include "erc/encoder.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace erc {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char raw : text) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'';
        if (keep) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    if (tokens.empty()) tokens.push_back("<oov>");
    return tokens;
}

EmbeddingTable load_word_vectors(const std::string& path, const std::vector<std::string>& keep) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open word-vector file: " + path);
    std::unordered_map<std::string, bool> wanted;
    for (const auto& t : keep) wanted[t] = true;

    EmbeddingTable table;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> words;
    int width = -1;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<double> vec;
        double x;
        while (ls >> x) vec.push_back(x);
        if (vec.empty()) throw DataError("word-vector line " + std::to_string(lineno) + ": no values");
        if (width < 0) width = static_cast<int>(vec.size());
        if (static_cast<int>(vec.size()) != width) {
            throw DataError("word-vector line " + std::to_string(lineno) + ": width " +
                            std::to_string(vec.size()) + " vs " + std::to_string(width));
        }
        if (!wanted.empty() && !wanted.count(token)) continue;
        if (table.vocab.count(token)) continue;
        table.vocab[token] = static_cast<int>(rows.size()) + 1; // row 0 reserved for OOV
        rows.push_back(std::move(vec));
        words.push_back(token);
    }
    if (width < 0) throw DataError("word-vector file is empty: " + path);
    table.vectors = Tensor({static_cast<int>(rows.size()) + 1, width});
    for (size_t r = 0; r < rows.size(); ++r)
        for (int j = 0; j < width; ++j) table.vectors.at(static_cast<int>(r) + 1, j) = rows[r][j];
    return table;
}

void save_word_vectors(const EmbeddingTable& table, const std::vector<std::string>& order, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write word-vector file: " + path);
    out.precision(17);
    for (const auto& word : order) {
        auto it = table.vocab.find(word);
        if (it == table.vocab.end()) continue;
        out << word;
        for (int j = 0; j < table.width(); ++j) out << ' ' << table.vectors.at(it->second, j);
        out << '\n';
    }
}

std::vector<int> token_ids(const std::vector<std::string>& tokens, const EmbeddingTable& table) {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(table.lookup(t));
    return ids;
}

Tensor embed_tokens(const std::vector<std::string>& tokens, const EmbeddingTable& table) {
    if (tokens.empty()) throw DataError("embed_tokens: empty token sequence");
    Tensor out({static_cast<int>(tokens.size()), table.width()});
    for (size_t i = 0; i < tokens.size(); ++i) {
        int row = table.lookup(tokens[i]);
        for (int j = 0; j < table.width(); ++j) out.at(static_cast<int>(i), j) = table.vectors.at(row, j);
    }
    return out;
}

EncoderHandles register_encoder_params(ParamSet& ps, int embed_width, const std::vector<int>& kernels,
                                       int filters, int out_width, Rng& rng) {
    EncoderHandles enc;
    enc.kernels = kernels;
    for (int k : kernels) {
        enc.conv_w.push_back(ps.add("enc.conv.k" + std::to_string(k) + ".w",
                                    xavier_uniform(k * embed_width, filters, rng), ParamGroup::Transformer));
        enc.conv_b.push_back(ps.add("enc.conv.k" + std::to_string(k) + ".b", Tensor({1, filters}),
                                    ParamGroup::Transformer));
    }
    int pooled = filters * static_cast<int>(kernels.size());
    enc.fc_w = ps.add("enc.fc.w", xavier_uniform(pooled, out_width, rng), ParamGroup::Transformer);
    enc.fc_b = ps.add("enc.fc.b", Tensor({1, out_width}), ParamGroup::Transformer);
    return enc;
}

Var encode_utterance_var(const std::vector<int>& ids, Binder& bind, const EncoderHandles& enc) {
    if (ids.empty()) throw DataError("encode_utterance: empty utterance");
    Var rows = rows_lookup(bind[enc.table], ids);
    std::vector<Var> pooled;
    for (size_t ki = 0; ki < enc.kernels.size(); ++ki) {
        Var windows = im2col(rows, enc.kernels[ki]);
        Var conv = add_rowvec(matmul(windows, bind[enc.conv_w[ki]]), bind[enc.conv_b[ki]]);
        pooled.push_back(colwise_max(conv));
    }
    Var features = pooled.size() == 1 ? pooled[0] : concat_cols(pooled);
    return relu(add_rowvec(matmul(features, bind[enc.fc_w]), bind[enc.fc_b]));
}

Tensor encode_utterance(const Tensor& token_matrix, const std::vector<int>& kernels,
                        const std::vector<Tensor>& conv_w, const std::vector<Tensor>& conv_b,
                        const Tensor& fc_w, const Tensor& fc_b) {
    Var rows = constant(token_matrix);
    std::vector<Var> pooled;
    for (size_t ki = 0; ki < kernels.size(); ++ki) {
        Var windows = im2col(rows, kernels[ki]);
        Var conv = add_rowvec(matmul(windows, constant(conv_w[ki])), constant(conv_b[ki]));
        pooled.push_back(colwise_max(conv));
    }
    Var features = pooled.size() == 1 ? pooled[0] : concat_cols(pooled);
    return relu(add_rowvec(matmul(features, constant(fc_w)), constant(fc_b)))->val;
}

std::vector<Tensor> load_precomputed(const std::string& path, const std::vector<std::string>& dialogue_ids,
                                     const std::vector<int>& turn_counts, int width) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open feature file: " + path);

    std::unordered_map<std::string, int> which;
    for (size_t i = 0; i < dialogue_ids.size(); ++i) which[dialogue_ids[i]] = static_cast<int>(i);

    std::vector<Tensor> out(dialogue_ids.size());
    std::vector<std::vector<bool>> seen(dialogue_ids.size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = Tensor({turn_counts[i], width});
        seen[i].assign(turn_counts[i], false);
    }

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("feature file line " + std::to_string(lineno) + ": " + e.what());
        }
        std::string id = j.at("dialogue_id").get<std::string>();
        auto it = which.find(id);
        if (it == which.end()) throw DataError("feature file line " + std::to_string(lineno) + ": unknown dialogue " + id);
        int d = it->second;
        int turn = j.at("turn").get<int>();
        if (turn < 0 || turn >= turn_counts[d]) {
            throw DataError("feature file line " + std::to_string(lineno) + ": turn " + std::to_string(turn) +
                            " outside dialogue of " + std::to_string(turn_counts[d]) + " turns");
        }
        auto vec = j.at("vector").get<std::vector<double>>();
        if (static_cast<int>(vec.size()) != width) {
            throw DataError("feature file line " + std::to_string(lineno) + ": width mismatch: expected " +
                            std::to_string(width) + ", found " + std::to_string(vec.size()));
        }
        for (int c = 0; c < width; ++c) out[d].at(turn, c) = vec[c];
        seen[d][turn] = true;
    }
    for (size_t d = 0; d < seen.size(); ++d) {
        int have = 0;
        for (bool b : seen[d]) have += b ? 1 : 0;
        if (have != turn_counts[d]) {
            throw DataError("feature file: dialogue " + dialogue_ids[d] + ": expected " +
                            std::to_string(turn_counts[d]) + " rows, found " + std::to_string(have));
        }
    }
    return out;
}

void save_precomputed(const std::string& path, const std::vector<std::string>& dialogue_ids,
                      const std::vector<Tensor>& features) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write feature file: " + path);
    for (size_t d = 0; d < dialogue_ids.size(); ++d) {
        for (int t = 0; t < features[d].rows(); ++t) {
            nlohmann::json j;
            j["dialogue_id"] = dialogue_ids[d];
            j["turn"] = t;
            std::vector<double> vec(features[d].cols());
            for (int c = 0; c < features[d].cols(); ++c) vec[c] = features[d].at(t, c);
            j["vector"] = vec;
            out << j.dump() << '\n';
        }
    }
}

} // namespace erc
