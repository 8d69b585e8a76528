#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "erc/checkpoint.hpp"
#include "erc/corpus.hpp"
#include "erc/encoder.hpp"
#include "erc/graph.hpp"
#include "erc/model.hpp"
#include "erc/train.hpp"

namespace {

using namespace erc;

struct CommonOpts {
    std::string config_path;
    nlohmann::json flag_overrides = nlohmann::json::object();
};

void add_config_flags(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file; flags override its fields");
    auto add_int = [&, cmd](const std::string& flag, const std::string& key, const std::string& help) {
        cmd->add_option_function<int>(flag, [&opts, key](int v) { opts.flag_overrides[key] = v; }, help);
    };
    auto add_double = [&, cmd](const std::string& flag, const std::string& key, const std::string& help) {
        cmd->add_option_function<double>(flag, [&opts, key](double v) { opts.flag_overrides[key] = v; }, help);
    };
    auto add_flag_bool = [&, cmd](const std::string& flag, const std::string& key, bool value, const std::string& help) {
        cmd->add_flag_callback(flag, [&opts, key, value]() { opts.flag_overrides[key] = value; }, help);
    };
    add_int("--d-emb", "d_emb", "word-vector width");
    add_int("--d-u", "d_u", "utterance feature width");
    add_int("--d-model", "d_model", "contextual width");
    add_int("--d-ff", "d_ff", "feed-forward width");
    add_int("--conv-filters", "conv_filters", "filters per conv kernel");
    add_int("--tsct-heads", "tsct_heads", "attention heads");
    add_int("--tsct-head-dim", "tsct_head_dim", "per-head width (0 = d_model/heads)");
    add_int("--tsct-layers", "tsct_layers", "transformer layers");
    add_int("--gnn-layers", "gnn_layers", "graph layers");
    add_int("--gnn-attn-width", "gnn_attn_width", "edge-attention width F'");
    add_int("--gnn-attn-heads", "gnn_attn_heads", "edge-attention heads");
    add_int("--window-past", "window_past", "past window p");
    add_int("--window-future", "window_future", "future window f");
    add_int("--warmup", "warmup_steps", "warmup steps");
    add_int("--epochs", "epochs", "training epochs");
    add_int("--batch-size", "batch_size", "dialogues per optimizer step");
    add_int("--patience", "patience", "early-stopping patience");
    add_double("--dropout", "dropout", "dropout rate");
    add_double("--lr-transformer", "lr_transformer", "transformer group lr");
    add_double("--lr-gnn", "lr_gnn", "graph group lr");
    add_double("--lr-crf", "lr_crf", "crf group lr");
    add_double("--weight-decay", "weight_decay", "decoupled weight decay");
    add_double("--grad-clip", "grad_clip", "global gradient-norm clip (0 disables)");
    cmd->add_option_function<uint64_t>("--seed", [&opts](uint64_t v) { opts.flag_overrides["seed"] = v; }, "RNG seed");
    add_flag_bool("--no-tsct", "use_tsct", false, "replace the two-stream layer with a single-stream one");
    add_flag_bool("--no-pag", "use_pag", false, "skip the graph stage");
    add_flag_bool("--no-crf", "use_crf", false, "per-utterance softmax instead of the CRF");
    add_flag_bool("--tsct-residual", "tsct_residual", true, "residual connection around the FFN");
    add_flag_bool("--raw-softmax-emissions", "raw_softmax_emissions", true, "probability-space emissions");
    cmd->add_option_function<std::string>(
        "--micro-exclude-label",
        [&opts](const std::string& v) { opts.flag_overrides["micro_exclude_label"] = v; },
        "label excluded from micro-F1");
}

ModelConfig resolve_config(const CommonOpts& opts) {
    nlohmann::json merged = nlohmann::json::object();
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw UsageError("cannot open config file: " + opts.config_path);
        try {
            merged = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(std::string("config file: ") + e.what());
        }
    }
    for (auto it = opts.flag_overrides.begin(); it != opts.flag_overrides.end(); ++it) {
        merged[it.key()] = it.value();
    }
    return ModelConfig::from_json(merged);
}

EmbeddingTable load_table(const std::string& vectors_path, const std::vector<Dialogue>& train, int d_emb) {
    if (vectors_path.empty()) {
        throw UsageError("--vectors is required when the corpus has text turns");
    }
    EmbeddingTable table = load_word_vectors(vectors_path, corpus_tokens(train));
    if (table.width() != d_emb) {
        throw DataError("word-vector width " + std::to_string(table.width()) + " does not match d_emb " +
                        std::to_string(d_emb));
    }
    return table;
}

bool corpus_has_text(const std::vector<Dialogue>& corpus) {
    for (const auto& d : corpus)
        for (const auto& t : d.turns)
            if (!t.vector) return true;
    return false;
}

void write_or_print(const nlohmann::json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << std::endl;
    } else {
        std::ofstream out(out_path);
        if (!out) throw DataError("cannot write output: " + out_path);
        out << j.dump(2) << '\n';
    }
}

int run(int argc, char** argv) {
    CLI::App app{"dialogue emotion tagger: two-stream transformer + position-aware graph + CRF"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string train_path, dev_path, data_path, vectors_path, ckpt_path, out_path, grid_path;

    auto* cmd_train = app.add_subcommand("train", "train a model and write a checkpoint");
    cmd_train->add_option("--train", train_path, "training corpus (JSONL)")->required();
    cmd_train->add_option("--dev", dev_path, "development corpus (JSONL)");
    cmd_train->add_option("--vectors", vectors_path, "word-vector file");
    cmd_train->add_option("--out", out_path, "checkpoint path")->required();
    add_config_flags(cmd_train, opts);

    auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint");
    cmd_eval->add_option("--data", data_path, "labeled corpus (JSONL)")->required();
    cmd_eval->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    cmd_eval->add_option("--out", out_path, "metrics JSON output (default stdout)");

    auto* cmd_predict = app.add_subcommand("predict", "decode labels for a corpus");
    cmd_predict->add_option("--data", data_path, "corpus (JSONL)")->required();
    cmd_predict->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    cmd_predict->add_option("--out", out_path, "predictions JSONL output (default stdout)");

    auto* cmd_sweep = app.add_subcommand("sweep", "train/evaluate over a grid of config overrides");
    cmd_sweep->add_option("--train", train_path, "training corpus (JSONL)")->required();
    cmd_sweep->add_option("--dev", dev_path, "development corpus (JSONL)");
    cmd_sweep->add_option("--grid", grid_path, "JSON array of config-override objects")->required();
    cmd_sweep->add_option("--vectors", vectors_path, "word-vector file");
    cmd_sweep->add_option("--out", out_path, "report output (default stdout)");
    add_config_flags(cmd_sweep, opts);

    auto* cmd_dump = app.add_subcommand("dump-graph", "debug dump of dialogue graphs as JSON");
    cmd_dump->add_option("--data", data_path, "corpus (JSONL)")->required();
    cmd_dump->add_option("--ckpt", ckpt_path, "checkpoint (optional; fresh params otherwise)");
    cmd_dump->add_option("--vectors", vectors_path, "word-vector file (when no checkpoint)");
    cmd_dump->add_option("--out", out_path, "output (default stdout)");
    add_config_flags(cmd_dump, opts);

    app.parse(argc, argv);

    if (cmd_train->parsed()) {
        ModelConfig cfg = resolve_config(opts);
        auto train = load_corpus(train_path);
        std::vector<Dialogue> dev;
        if (!dev_path.empty()) dev = load_corpus(dev_path);
        CorpusVocabs vocabs = build_vocabs(train);
        EmbeddingTable table;
        if (corpus_has_text(train)) {
            table = load_table(vectors_path, train, cfg.d_emb);
        } else {
            table.vectors = Tensor({1, cfg.d_emb});
        }

        std::vector<uint64_t> seeds = cfg.seeds.empty() ? std::vector<uint64_t>{cfg.seed} : cfg.seeds;
        nlohmann::json runs = nlohmann::json::array();
        double f1_sum = 0.0;
        std::string best_path_metrics;
        for (size_t si = 0; si < seeds.size(); ++si) {
            ModelConfig run_cfg = cfg;
            run_cfg.seed = seeds[si];
            Model model(run_cfg, vocabs, table);
            TrainResult tr = train_model(model, train, dev);
            Metrics m = dev.empty() ? evaluate(model, train) : evaluate(model, dev);
            nlohmann::json rj;
            rj["seed"] = seeds[si];
            rj["best_epoch"] = tr.best_epoch;
            rj["metrics"] = m.to_json(vocabs.labels.names);
            runs.push_back(rj);
            f1_sum += m.weighted_f1;
            if (si == 0) save_checkpoint(model, out_path); // first seed's model is the artifact
        }
        nlohmann::json report;
        report["runs"] = runs;
        report["mean_weighted_f1"] = f1_sum / seeds.size();
        report["checkpoint"] = out_path;
        std::cout << report.dump(2) << std::endl;
        return 0;
    }

    if (cmd_eval->parsed()) {
        Model model = load_checkpoint(ckpt_path);
        auto data = load_corpus(data_path);
        Metrics m = evaluate(model, data);
        write_or_print(m.to_json(model.vocabs().labels.names), out_path);
        return 0;
    }

    if (cmd_predict->parsed()) {
        Model model = load_checkpoint(ckpt_path);
        auto data = load_corpus(data_path);
        auto preds = predict_corpus(model, data);
        std::ostringstream lines;
        for (const auto& pd : preds) {
            nlohmann::json j;
            j["dialogue_id"] = pd.id;
            j["labels"] = pd.labels;
            lines << j.dump() << '\n';
        }
        if (out_path.empty()) {
            std::cout << lines.str();
        } else {
            std::ofstream out(out_path);
            if (!out) throw DataError("cannot write output: " + out_path);
            out << lines.str();
        }
        return 0;
    }

    if (cmd_sweep->parsed()) {
        ModelConfig cfg = resolve_config(opts);
        auto train = load_corpus(train_path);
        std::vector<Dialogue> dev;
        if (!dev_path.empty()) dev = load_corpus(dev_path);
        CorpusVocabs vocabs = build_vocabs(train);
        EmbeddingTable table;
        if (corpus_has_text(train)) {
            table = load_table(vectors_path, train, cfg.d_emb);
        } else {
            table.vectors = Tensor({1, cfg.d_emb});
        }
        std::ifstream gin(grid_path);
        if (!gin) throw UsageError("cannot open grid file: " + grid_path);
        nlohmann::json gj;
        try {
            gj = nlohmann::json::parse(gin);
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(std::string("grid file: ") + e.what());
        }
        if (!gj.is_array()) throw UsageError("grid file must hold a JSON array of override objects");
        std::vector<nlohmann::json> grid(gj.begin(), gj.end());
        write_or_print(sweep(cfg, vocabs, table, train, dev, grid), out_path);
        return 0;
    }

    if (cmd_dump->parsed()) {
        auto data = load_corpus(data_path);
        nlohmann::json out = nlohmann::json::array();

        std::optional<Model> model;
        if (!ckpt_path.empty()) {
            model.emplace(load_checkpoint(ckpt_path));
        } else {
            ModelConfig cfg = resolve_config(opts);
            CorpusVocabs vocabs = build_vocabs(data);
            EmbeddingTable table;
            if (corpus_has_text(data)) {
                table = load_table(vectors_path, data, cfg.d_emb);
            } else {
                table.vectors = Tensor({1, cfg.d_emb});
            }
            model.emplace(cfg, vocabs, table);
        }

        for (const auto& d : data) {
            EncodedDialogue enc = model->encode_dialogue(d, false);
            Binder bind(model->params(), false);
            PipelineOut po = model->forward(enc, bind, nullptr);
            // recover the averaged edge attention for the dump
            nlohmann::json dj;
            dj["dialogue_id"] = d.id;
            dj["nodes"] = po.graph.n;
            dj["edges"] = nlohmann::json::array();
            Tensor alpha({po.graph.n, po.graph.n});
            if (model->config().use_pag) {
                // alpha of the first graph layer, computed from h
                ParamSet& ps = model->params();
                std::vector<EdgeAttentionHead> heads;
                for (int h = 0; h < model->config().gnn_attn_heads; ++h) {
                    std::string hb = "gnn.l0.attn.h" + std::to_string(h) + ".";
                    heads.push_back({ps.at(hb + "w").value, ps.at(hb + "a").value});
                }
                alpha = edge_weights(po.h->val, po.graph, heads, ps.at("gnn.position_table").value).alpha;
            } else {
                for (const auto& e : po.graph.edges) {
                    alpha.at(e.dst, e.src) = 1.0 / po.graph.in_degree(e.dst);
                }
            }
            for (const auto& e : po.graph.edges) {
                nlohmann::json ej;
                ej["src"] = e.src;
                ej["dst"] = e.dst;
                ej["relation"] = e.relation;
                ej["offset"] = e.offset;
                ej["alpha"] = alpha.at(e.dst, e.src);
                dj["edges"].push_back(ej);
            }
            out.push_back(dj);
        }
        write_or_print(out, out_path);
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ParseError& e) {
        CLI::App app;
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const erc::UsageError& e) {
        std::cerr << "usage error: " << e.what() << std::endl;
        return 1;
    } catch (const erc::DataError& e) {
        std::cerr << "data error: " << e.what() << std::endl;
        return 2;
    } catch (const erc::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << std::endl;
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 3;
    }
}
