#include "erc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "erc/encoder.hpp"

namespace erc {

std::vector<Dialogue> load_corpus(const std::string& path, CorpusFormat format) {
    if (format != CorpusFormat::Jsonl) throw UsageError("unsupported corpus format");
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus: " + path);

    std::vector<Dialogue> corpus;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
        Dialogue d;
        try {
            d.id = j.at("dialogue_id").get<std::string>();
            const auto& turns = j.at("turns");
            if (!turns.is_array() || turns.empty()) {
                throw DataError("corpus line " + std::to_string(lineno) + ": dialogue needs at least one turn");
            }
            for (const auto& tj : turns) {
                Turn t;
                if (!tj.contains("speaker")) {
                    throw DataError("corpus line " + std::to_string(lineno) + ": turn missing \"speaker\" field");
                }
                t.speaker = tj.at("speaker").get<std::string>();
                if (tj.contains("vector")) {
                    t.vector = tj.at("vector").get<std::vector<double>>();
                } else if (tj.contains("text")) {
                    t.text = tj.at("text").get<std::string>();
                } else {
                    throw DataError("corpus line " + std::to_string(lineno) + ": turn needs \"text\" or \"vector\"");
                }
                if (tj.contains("label")) t.label = tj.at("label").get<std::string>();
                d.turns.push_back(std::move(t));
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
        corpus.push_back(std::move(d));
    }
    return corpus;
}

void save_corpus(const std::vector<Dialogue>& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write corpus: " + path);
    for (const auto& d : corpus) {
        nlohmann::json j;
        j["dialogue_id"] = d.id;
        j["turns"] = nlohmann::json::array();
        for (const auto& t : d.turns) {
            nlohmann::json tj;
            tj["speaker"] = t.speaker;
            if (t.vector) {
                tj["vector"] = *t.vector;
            } else {
                tj["text"] = t.text;
            }
            if (t.label) tj["label"] = *t.label;
            j["turns"].push_back(tj);
        }
        out << j.dump() << '\n';
    }
}

Vocab Vocab::build(std::vector<std::string> values) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    Vocab v;
    v.names = std::move(values);
    return v;
}

int Vocab::find(const std::string& name) const {
    // linear scan: vocabs are small and the speaker vocab has an unsorted
    // trailing UNK entry
    for (size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

CorpusVocabs build_vocabs(const std::vector<Dialogue>& train) {
    std::vector<std::string> labels, speakers;
    for (const auto& d : train) {
        for (const auto& t : d.turns) {
            speakers.push_back(t.speaker);
            if (t.label) labels.push_back(*t.label);
        }
    }
    CorpusVocabs v;
    v.labels = Vocab::build(std::move(labels));
    v.speakers = Vocab::build(std::move(speakers));
    v.speakers.names.push_back(CorpusVocabs::kUnkSpeaker);
    return v;
}

std::vector<std::string> corpus_tokens(const std::vector<Dialogue>& corpus) {
    std::set<std::string> seen;
    for (const auto& d : corpus) {
        for (const auto& t : d.turns) {
            if (t.vector) continue;
            for (auto& tok : tokenize(t.text)) seen.insert(tok);
        }
    }
    return {seen.begin(), seen.end()};
}

} // namespace erc
