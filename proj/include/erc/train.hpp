#pragma once

#include <functional>
#include <string>
#include <vector>

#include "erc/metrics.hpp"
#include "erc/model.hpp"
#include "erc/numerics.hpp"

namespace erc {

// Decoupled-weight-decay Adam with one base learning rate per parameter
// group, all scaled by an inverse-square-root warmup factor that peaks at 1
// when step == warmup.
class AdamW {
public:
    AdamW(ParamSet& params, const ModelConfig& cfg);
    void step();
    int steps_taken() const { return t_; }
    static double schedule(int step, int warmup);

private:
    ParamSet& params_;
    double group_lr_[3];
    double weight_decay_;
    int warmup_;
    int t_ = 0;
    std::vector<Tensor> m_, v_;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double dev_weighted_f1 = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_dev_f1 = 0.0;
    Metrics dev_metrics;
};

// Batches are whole dialogues; gradients are summed in fixed order and
// clipped at the configured global norm. Keeps the parameters of the best
// dev weighted-F1 epoch (early stopping after `patience` non-improving
// epochs). Non-finite losses abort with epoch and dialogue id.
TrainResult train_model(Model& model, const std::vector<Dialogue>& train, const std::vector<Dialogue>& dev,
                        const std::function<void(const EpochStats&)>& on_epoch = nullptr);

Metrics evaluate(const Model& model, const std::vector<Dialogue>& data);

struct PredictedDialogue {
    std::string id;
    std::vector<std::string> labels;
};
std::vector<PredictedDialogue> predict_corpus(const Model& model, const std::vector<Dialogue>& data);

// One row per config-override cell; failures are recorded, not fatal.
nlohmann::json sweep(const ModelConfig& base, const CorpusVocabs& vocabs, const EmbeddingTable& table,
                     const std::vector<Dialogue>& train, const std::vector<Dialogue>& dev,
                     const std::vector<nlohmann::json>& grid);

// Sum of per-dialogue losses with gradients left in model.params(); the
// grad_check hook for the end-to-end oracle.
double corpus_loss(Model& model, const std::vector<EncodedDialogue>& dialogues, bool with_grad);

} // namespace erc
