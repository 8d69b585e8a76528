#pragma once

#include <optional>
#include <string>
#include <vector>

#include "erc/tensor.hpp"

namespace erc {

struct Turn {
    std::string speaker;
    std::string text;
    std::optional<std::vector<double>> vector; // precomputed feature, bypasses the text encoder
    std::optional<std::string> label;
};

struct Dialogue {
    std::string id;
    std::vector<Turn> turns;
};

enum class CorpusFormat { Jsonl };

// One dialogue per line. Ordering is file order. Malformed lines raise
// DataError with the line number; a turn without "speaker" names the field.
std::vector<Dialogue> load_corpus(const std::string& path, CorpusFormat format = CorpusFormat::Jsonl);
void save_corpus(const std::vector<Dialogue>& corpus, const std::string& path);

// Sorted-lexicographic name -> index map so indices are stable across
// machines and runs.
struct Vocab {
    std::vector<std::string> names;

    static Vocab build(std::vector<std::string> values);
    int size() const { return static_cast<int>(names.size()); }
    int find(const std::string& name) const; // -1 when absent
    const std::string& name(int id) const { return names[id]; }
};

// Label and speaker vocabularies from a training split. The speaker vocab
// carries a trailing UNK entry for speakers first seen at inference.
struct CorpusVocabs {
    Vocab labels;
    Vocab speakers; // last entry is kUnkSpeaker
    static constexpr const char* kUnkSpeaker = "<unk-speaker>";
};

CorpusVocabs build_vocabs(const std::vector<Dialogue>& train);

// Tokens of the training split (for trimming a word-vector file).
std::vector<std::string> corpus_tokens(const std::vector<Dialogue>& corpus);

} // namespace erc
