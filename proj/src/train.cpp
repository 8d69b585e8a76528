#include "erc/train.hpp"

#include <algorithm>
#include <cmath>

namespace erc {

AdamW::AdamW(ParamSet& params, const ModelConfig& cfg) : params_(params) {
    group_lr_[static_cast<int>(ParamGroup::Transformer)] = cfg.lr_transformer;
    group_lr_[static_cast<int>(ParamGroup::Graph)] = cfg.lr_gnn;
    group_lr_[static_cast<int>(ParamGroup::Crf)] = cfg.lr_crf;
    weight_decay_ = cfg.weight_decay;
    warmup_ = cfg.warmup_steps;
    m_.resize(params.count());
    v_.resize(params.count());
    for (int i = 0; i < params.count(); ++i) {
        m_[i] = Tensor::zeros(params[i].value.shape);
        v_[i] = Tensor::zeros(params[i].value.shape);
    }
}

double AdamW::schedule(int step, int warmup) {
    if (warmup <= 0) return 1.0;
    if (step <= 0) return 0.0;
    return std::min(static_cast<double>(step) / warmup, std::sqrt(static_cast<double>(warmup) / step));
}

void AdamW::step() {
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    double factor = schedule(t_, warmup_);
    double bc1 = 1.0 - std::pow(beta1, t_);
    double bc2 = 1.0 - std::pow(beta2, t_);
    for (int i = 0; i < params_.count(); ++i) {
        ParamTensor& p = params_[i];
        if (!p.trainable) continue;
        double lr = group_lr_[static_cast<int>(p.group)] * factor;
        for (int64_t k = 0; k < p.value.size(); ++k) {
            double g = p.grad[k];
            m_[i][k] = beta1 * m_[i][k] + (1.0 - beta1) * g;
            v_[i][k] = beta2 * v_[i][k] + (1.0 - beta2) * g * g;
            double mhat = m_[i][k] / bc1;
            double vhat = v_[i][k] / bc2;
            p.value[k] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay_ * p.value[k]);
        }
    }
}

namespace {

struct Snapshot {
    std::vector<Tensor> values;
};

Snapshot take_snapshot(const ParamSet& ps) {
    Snapshot s;
    s.values.reserve(ps.count());
    for (int i = 0; i < ps.count(); ++i) s.values.push_back(ps[i].value);
    return s;
}

void restore_snapshot(ParamSet& ps, const Snapshot& s) {
    for (int i = 0; i < ps.count(); ++i) ps[i].value = s.values[i];
}

} // namespace

double corpus_loss(Model& model, const std::vector<EncodedDialogue>& dialogues, bool with_grad) {
    if (with_grad) model.params().zero_grads();
    double total = 0.0;
    for (const auto& d : dialogues) {
        Binder bind(model.params(), with_grad);
        PipelineOut out = model.forward(d, bind, nullptr);
        Var loss = model.loss(out, d.labels, bind);
        total += loss->val[0];
        if (with_grad) {
            backward(loss);
            bind.collect_grads();
        }
    }
    return total;
}

TrainResult train_model(Model& model, const std::vector<Dialogue>& train, const std::vector<Dialogue>& dev,
                        const std::function<void(const EpochStats&)>& on_epoch) {
    if (train.empty()) throw DataError("train_model: empty training set");
    const ModelConfig& cfg = model.config();

    std::vector<EncodedDialogue> train_enc;
    train_enc.reserve(train.size());
    for (const auto& d : train) train_enc.push_back(model.encode_dialogue(d, true));

    AdamW opt(model.params(), cfg);
    Rng order_rng = Rng(cfg.seed).fork(17);
    Rng dropout_rng = Rng(cfg.seed).fork(29);

    TrainResult result;
    Snapshot best = take_snapshot(model.params());
    int since_best = 0;

    std::vector<int> order(train_enc.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // deterministic Fisher-Yates reshuffle per epoch
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
            std::swap(order[i], order[order_rng.uniform_int(0, i)]);
        }

        double epoch_loss = 0.0;
        size_t cursor = 0;
        while (cursor < order.size()) {
            model.params().zero_grads();
            size_t batch_end = std::min(cursor + static_cast<size_t>(cfg.batch_size), order.size());
            for (size_t b = cursor; b < batch_end; ++b) {
                const EncodedDialogue& d = train_enc[order[b]];
                Binder bind(model.params(), true);
                Rng* drop = cfg.dropout > 0.0 ? &dropout_rng : nullptr;
                PipelineOut out = model.forward(d, bind, drop);
                Var loss = model.loss(out, d.labels, bind);
                double value = loss->val[0];
                if (!std::isfinite(value)) {
                    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", dialogue " + d.id);
                }
                epoch_loss += value;
                backward(loss);
                bind.collect_grads();
            }
            cursor = batch_end;

            if (cfg.grad_clip > 0.0) {
                double norm = std::sqrt(model.params().grad_squared_norm());
                if (norm > cfg.grad_clip) model.params().scale_grads(cfg.grad_clip / norm);
            }
            opt.step();
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss;
        Metrics dev_metrics;
        if (!dev.empty()) {
            dev_metrics = evaluate(model, dev);
            stats.dev_weighted_f1 = dev_metrics.weighted_f1;
        }
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);

        if (dev.empty()) {
            best = take_snapshot(model.params());
            result.best_epoch = epoch;
            continue;
        }
        if (stats.dev_weighted_f1 > result.best_dev_f1 || result.best_epoch < 0) {
            result.best_dev_f1 = stats.dev_weighted_f1;
            result.best_epoch = epoch;
            result.dev_metrics = dev_metrics;
            best = take_snapshot(model.params());
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    restore_snapshot(model.params(), best);
    return result;
}

Metrics evaluate(const Model& model, const std::vector<Dialogue>& data) {
    if (data.empty()) throw DataError("evaluate: empty data set");
    std::vector<int> gold, pred;
    for (const auto& d : data) {
        EncodedDialogue enc = model.encode_dialogue(d, true);
        std::vector<int> p = model.predict(enc);
        for (int i = 0; i < enc.length(); ++i) {
            gold.push_back(enc.labels[i]);
            pred.push_back(p[i]);
        }
    }
    int exclude = -1;
    if (!model.config().micro_exclude_label.empty()) {
        exclude = model.vocabs().labels.find(model.config().micro_exclude_label);
        if (exclude < 0) throw DataError("micro_exclude_label not in label vocabulary: " +
                                         model.config().micro_exclude_label);
    }
    return compute_metrics(gold, pred, model.num_labels(), exclude);
}

std::vector<PredictedDialogue> predict_corpus(const Model& model, const std::vector<Dialogue>& data) {
    std::vector<PredictedDialogue> out;
    for (const auto& d : data) {
        EncodedDialogue enc = model.encode_dialogue(d, false);
        PredictedDialogue pd;
        pd.id = d.id;
        for (int tag : model.predict(enc)) pd.labels.push_back(model.vocabs().labels.name(tag));
        out.push_back(std::move(pd));
    }
    return out;
}

nlohmann::json sweep(const ModelConfig& base, const CorpusVocabs& vocabs, const EmbeddingTable& table,
                     const std::vector<Dialogue>& train, const std::vector<Dialogue>& dev,
                     const std::vector<nlohmann::json>& grid) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& overrides : grid) {
        nlohmann::json row;
        row["overrides"] = overrides;
        try {
            nlohmann::json merged = base.to_json();
            for (auto it = overrides.begin(); it != overrides.end(); ++it) merged[it.key()] = it.value();
            ModelConfig cfg = ModelConfig::from_json(merged);
            Model model(cfg, vocabs, table);
            TrainResult tr = train_model(model, train, dev);
            Metrics m = dev.empty() ? evaluate(model, train) : evaluate(model, dev);
            row["metrics"] = m.to_json(vocabs.labels.names);
            row["best_epoch"] = tr.best_epoch;
        } catch (const std::exception& e) {
            row["error"] = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace erc
