#include "erc/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace erc {

namespace {

const char kMagic[8] = {'E', 'R', 'C', 'C', 'K', 'P', 'T', '\0'};

uint64_t fnv1a(const std::string& bytes) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    put_u64(out, bits);
}

struct Reader {
    const std::string& bytes;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > bytes.size()) throw DataError("checkpoint integrity error: truncated file");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }
    std::string str(size_t n) {
        need(n);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

} // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::string out;
    out.append(kMagic, 8);
    put_u32(out, kCheckpointVersion);

    nlohmann::json header;
    header["config"] = model.config().to_json();
    header["labels"] = model.vocabs().labels.names;
    header["speakers"] = model.vocabs().speakers.names;
    nlohmann::json words = nlohmann::json::object();
    for (const auto& [token, row] : model.embeddings().vocab) words[token] = row;
    header["words"] = words;
    std::string hjson = header.dump();
    put_u32(out, static_cast<uint32_t>(hjson.size()));
    out += hjson;

    const ParamSet& ps = model.params();
    put_u32(out, static_cast<uint32_t>(ps.count()));
    for (int i = 0; i < ps.count(); ++i) {
        const ParamTensor& p = ps[i];
        put_u32(out, static_cast<uint32_t>(p.name.size()));
        out += p.name;
        put_u32(out, static_cast<uint32_t>(p.value.shape.size()));
        for (int d : p.value.shape) put_u32(out, static_cast<uint32_t>(d));
        for (double x : p.value.v) put_f64(out, x);
    }
    put_u64(out, fnv1a(out));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("short write to checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (bytes.size() < 8 + 4 + 8) throw DataError("checkpoint integrity error: truncated file");
    if (std::memcmp(bytes.data(), kMagic, 8) != 0) throw DataError("not a checkpoint file: " + path);

    std::string body = bytes.substr(0, bytes.size() - 8);
    Reader tail{bytes, bytes.size() - 8};
    if (tail.u64() != fnv1a(body)) throw DataError("checkpoint integrity error: checksum mismatch");

    Reader r{body, 8};
    uint32_t version = r.u32();
    if (version > kCheckpointVersion) {
        throw DataError("checkpoint version " + std::to_string(version) + " is newer than supported " +
                        std::to_string(kCheckpointVersion));
    }

    uint32_t hlen = r.u32();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.str(hlen));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint header: ") + e.what());
    }
    ModelConfig cfg = ModelConfig::from_json(header.at("config"));
    CorpusVocabs vocabs;
    vocabs.labels.names = header.at("labels").get<std::vector<std::string>>();
    vocabs.speakers.names = header.at("speakers").get<std::vector<std::string>>();

    std::unordered_map<std::string, int> words;
    for (auto it = header.at("words").begin(); it != header.at("words").end(); ++it) {
        words[it.key()] = it.value().get<int>();
    }

    uint32_t count = r.u32();
    std::vector<std::pair<std::string, Tensor>> tensors;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t nlen = r.u32();
        std::string name = r.str(nlen);
        uint32_t rank = r.u32();
        std::vector<int> shape;
        int64_t total = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<int>(r.u32()));
            total *= shape.back();
        }
        Tensor t(shape);
        for (int64_t k = 0; k < total; ++k) t[k] = r.f64();
        tensors.emplace_back(std::move(name), std::move(t));
    }
    if (r.pos != body.size()) throw DataError("checkpoint integrity error: trailing bytes");

    int embed_rows = 0;
    for (const auto& [name, t] : tensors) {
        if (name == "enc.embeddings") embed_rows = t.rows();
    }
    Model model = Model::restore(std::move(cfg), std::move(vocabs), embed_rows);
    model.set_embedding_vocab(std::move(words));

    ParamSet& ps = model.params();
    if (static_cast<int>(tensors.size()) != ps.count()) {
        throw DataError("checkpoint parameter count " + std::to_string(tensors.size()) +
                        " does not match model " + std::to_string(ps.count()));
    }
    for (auto& [name, t] : tensors) {
        if (!ps.contains(name)) throw DataError("checkpoint has unknown parameter: " + name);
        ParamTensor& p = ps.at(name);
        if (p.value.shape != t.shape) {
            throw DataError("checkpoint parameter " + name + " shape " + t.shape_str() + " vs model " +
                            p.value.shape_str());
        }
        p.value = std::move(t);
    }
    return model;
}

} // namespace erc
