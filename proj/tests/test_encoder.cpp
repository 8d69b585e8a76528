#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "erc/encoder.hpp"
#include "erc/numerics.hpp"
#include "synthetic.hpp"

using namespace erc;

namespace {

EmbeddingTable tiny_table() {
    EmbeddingTable t;
    t.vectors = Tensor({3, 4});
    t.vocab["red"] = 1;
    t.vocab["blue"] = 2;
    for (int j = 0; j < 4; ++j) {
        t.vectors.at(1, j) = 0.5 + j;
        t.vectors.at(2, j) = -1.0 - j;
    }
    return t;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("tokenize lowercases and splits on punctuation") {
    CHECK(tokenize("Hello, World!") == std::vector<std::string>{"hello", "world"});
    CHECK(tokenize("don't stop") == std::vector<std::string>{"don't", "stop"});
    CHECK(tokenize("a1-b2") == std::vector<std::string>{"a1", "b2"});
    CHECK(tokenize("") == std::vector<std::string>{"<oov>"});
    CHECK(tokenize("...") == std::vector<std::string>{"<oov>"});
}

TEST_CASE("embed_tokens examples") {
    EmbeddingTable t = tiny_table();
    SUBCASE("known token is returned bit-exactly") {
        Tensor e = embed_tokens({"red"}, t);
        for (int j = 0; j < 4; ++j) CHECK(e.at(0, j) == t.vectors.at(1, j));
    }
    SUBCASE("unknown token maps to the zero row") {
        Tensor e = embed_tokens({"green"}, t);
        for (int j = 0; j < 4; ++j) CHECK(e.at(0, j) == 0.0);
    }
    SUBCASE("a mixed sequence stacks per-token lookups") {
        Tensor e = embed_tokens({"red", "green", "blue"}, t);
        REQUIRE(e.rows() == 3);
        for (int j = 0; j < 4; ++j) {
            CHECK(e.at(0, j) == t.vectors.at(1, j));
            CHECK(e.at(1, j) == 0.0);
            CHECK(e.at(2, j) == t.vectors.at(2, j));
        }
    }
}

TEST_CASE("encode_utterance examples") {
    SUBCASE("all-zero tokens with zero conv bias pass the FC bias through the ReLU") {
        Tensor zeros({3, 4});
        std::vector<Tensor> conv_w = {Tensor({8, 2})};
        std::vector<Tensor> conv_b = {Tensor({1, 2})};
        Tensor fc_w({2, 3});
        Tensor fc_b = Tensor::row({0.5, -0.25, 1.5});
        Tensor out = encode_utterance(zeros, {2}, conv_w, conv_b, fc_w, fc_b);
        CHECK(out[0] == 0.5);
        CHECK(out[1] == 0.0); // relu clips the negative bias
        CHECK(out[2] == 1.5);
    }
    SUBCASE("duplicating the max-attaining row leaves the output unchanged") {
        Rng rng(81);
        Tensor m = random_normal({4, 3}, 0.0, 1.0, rng);
        std::vector<Tensor> conv_w = {random_normal({3, 1}, 0.0, 1.0, rng)}; // kernel 1, one filter
        std::vector<Tensor> conv_b = {random_normal({1, 1}, 0.0, 1.0, rng)};
        Tensor fc_w = random_normal({1, 2}, 0.0, 1.0, rng);
        Tensor fc_b = random_normal({1, 2}, 0.0, 1.0, rng);
        Tensor base = encode_utterance(m, {1}, conv_w, conv_b, fc_w, fc_b);

        Tensor conv = linear(m, conv_w[0], conv_b[0]);
        int arg = 0;
        for (int i = 1; i < 4; ++i) {
            if (conv.at(i, 0) > conv.at(arg, 0)) arg = i;
        }
        Tensor dup({5, 3});
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 3; ++j) dup.at(i, j) = m.at(i, j);
        for (int j = 0; j < 3; ++j) dup.at(4, j) = m.at(arg, j);
        Tensor out = encode_utterance(dup, {1}, conv_w, conv_b, fc_w, fc_b);
        CHECK(out.v == base.v);
    }
    SUBCASE("raising any single conv activation never lowers the pooled value") {
        Rng rng(85);
        Tensor acts = random_normal({5, 3}, 0.0, 1.0, rng);
        Var pooled = colwise_max(constant(acts));
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 3; ++j) {
                Tensor bumped = acts;
                bumped.at(i, j) += rng.uniform(0.0, 2.0);
                Var p2 = colwise_max(constant(bumped));
                for (int c = 0; c < 3; ++c) CHECK(p2->val[c] >= pooled->val[c]);
            }
        }
    }
    SUBCASE("hand-computed 2-token, 4-dim, single kernel-2 filter") {
        // rows r0 = (1, 2, 0, 1), r1 = (0, 1, 1, 3); one window = r0 || r1
        // filter w = (0.5, -1, 0.25, 2, 1, -0.5, 0, 1), bias 0.1
        // conv = 0.5 - 2 + 0 + 2 + 0 - 0.5 + 0 + 3 + 0.1 = 3.1
        // fc: weight 2, bias -0.2 -> relu(2*3.1 - 0.2) = 6.0
        Tensor m({2, 4}, {1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0, 3.0});
        std::vector<Tensor> conv_w = {Tensor({8, 1}, {0.5, -1.0, 0.25, 2.0, 1.0, -0.5, 0.0, 1.0})};
        std::vector<Tensor> conv_b = {Tensor({1, 1}, {0.1})};
        Tensor fc_w({1, 1}, {2.0});
        Tensor fc_b({1, 1}, {-0.2});
        Tensor out = encode_utterance(m, {2}, conv_w, conv_b, fc_w, fc_b);
        CHECK(out[0] == doctest::Approx(6.0).epsilon(1e-12));
    }
    SUBCASE("utterances shorter than the kernel are zero-padded") {
        // single row, kernel 3: the window is row || 0 || 0
        Tensor m({1, 2}, {1.0, -2.0});
        std::vector<Tensor> conv_w = {Tensor({6, 1}, {1.0, 1.0, 5.0, 5.0, 5.0, 5.0})};
        std::vector<Tensor> conv_b = {Tensor({1, 1})};
        Tensor fc_w({1, 1}, {1.0});
        Tensor fc_b({1, 1});
        Tensor out = encode_utterance(m, {3}, conv_w, conv_b, fc_w, fc_b);
        CHECK(out[0] == 0.0); // 1 - 2 = -1, relu -> 0
        Tensor fc_b2({1, 1}, {1.5});
        CHECK(encode_utterance(m, {3}, conv_w, conv_b, fc_w, fc_b2)[0] == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("token order changes the encoding") {
    Rng rng(82);
    EmbeddingTable t = tiny_table();
    ParamSet ps;
    int table = ps.add("emb", t.vectors, ParamGroup::Transformer, false);
    EncoderHandles enc = register_encoder_params(ps, 4, {2}, 3, 5, rng);
    enc.table = table;
    Binder bind(ps, false);
    Var a = encode_utterance_var({1, 2, 0}, bind, enc);
    Var b = encode_utterance_var({2, 1, 0}, bind, enc);
    bool differs = false;
    for (int64_t i = 0; i < a->val.size(); ++i) differs |= a->val[i] != b->val[i];
    CHECK(differs);
}

TEST_CASE("encoder parameters pass grad_check") {
    Rng rng(83);
    ParamSet ps;
    int table = ps.add("emb", random_normal({5, 4}, 0.0, 1.0, rng), ParamGroup::Transformer, true);
    EncoderHandles enc = register_encoder_params(ps, 4, {2, 3}, 2, 3, rng);
    enc.table = table;
    Tensor fold = Tensor::row({0.7, -0.3, 0.4});
    auto loss = [&](bool with_grad) {
        Binder bind(ps, with_grad);
        Var u = encode_utterance_var({1, 3, 2, 4}, bind, enc);
        Var s = sum_all(mul_const(u, fold));
        if (with_grad) {
            backward(s);
            bind.collect_grads();
        }
        return s->val[0];
    };
    GradReport r = grad_check(ps, loss, 1e-5, 1e-4);
    CHECK(r.all_pass);
}

TEST_CASE("word-vector file round trip") {
    EmbeddingTable t = tiny_table();
    std::string path = temp_path("erc_vectors_test.txt");
    save_word_vectors(t, {"red", "blue"}, path);
    EmbeddingTable loaded = load_word_vectors(path);
    REQUIRE(loaded.width() == 4);
    for (int j = 0; j < 4; ++j) {
        CHECK(loaded.vectors.at(loaded.lookup("red"), j) == t.vectors.at(1, j));
        CHECK(loaded.vectors.at(loaded.lookup("blue"), j) == t.vectors.at(2, j));
    }
    CHECK(loaded.lookup("green") == 0);
    std::filesystem::remove(path);
}

TEST_CASE("precomputed feature files") {
    std::string path = temp_path("erc_features_test.jsonl");
    std::vector<std::string> ids = {"d0", "d1"};
    Rng rng(84);
    std::vector<Tensor> feats = {random_normal({2, 3}, 0.0, 1.0, rng), random_normal({1, 3}, 0.0, 1.0, rng)};

    SUBCASE("write-then-load is exact") {
        save_precomputed(path, ids, feats);
        auto loaded = load_precomputed(path, ids, {2, 1}, 3);
        REQUIRE(loaded.size() == 2);
        CHECK(loaded[0].v == feats[0].v);
        CHECK(loaded[1].v == feats[1].v);
    }
    SUBCASE("width mismatch names expected and found") {
        save_precomputed(path, ids, feats);
        CHECK_THROWS_WITH_AS(load_precomputed(path, ids, {2, 1}, 4), doctest::Contains("expected 4"), DataError);
    }
    SUBCASE("missing rows are an error") {
        save_precomputed(path, ids, feats);
        CHECK_THROWS_WITH_AS(load_precomputed(path, ids, {3, 1}, 3), doctest::Contains("expected 3"), DataError);
    }
    std::filesystem::remove(path);
}
