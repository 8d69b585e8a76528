#include "erc/metrics.hpp"

#include "erc/common.hpp"

namespace erc {

Metrics compute_metrics(const std::vector<int>& gold, const std::vector<int>& pred, int num_labels,
                        int exclude_label) {
    if (gold.size() != pred.size()) throw NumericError("compute_metrics: gold/pred size mismatch");
    if (gold.empty()) throw DataError("compute_metrics: empty evaluation set");

    Metrics m;
    m.total = static_cast<int>(gold.size());
    m.confusion.assign(num_labels, std::vector<int>(num_labels, 0));
    for (size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] < 0 || gold[i] >= num_labels || pred[i] < 0 || pred[i] >= num_labels) {
            throw NumericError("compute_metrics: label id out of range");
        }
        m.confusion[gold[i]][pred[i]] += 1;
    }

    m.per_class.resize(num_labels);
    int correct = 0;
    double weighted = 0.0;
    for (int c = 0; c < num_labels; ++c) {
        int tp = m.confusion[c][c];
        int gold_c = 0, pred_c = 0;
        for (int j = 0; j < num_labels; ++j) {
            gold_c += m.confusion[c][j];
            pred_c += m.confusion[j][c];
        }
        correct += tp;
        ClassScore& s = m.per_class[c];
        s.support = gold_c;
        s.precision = pred_c > 0 ? static_cast<double>(tp) / pred_c : 0.0;
        s.recall = gold_c > 0 ? static_cast<double>(tp) / gold_c : 0.0;
        s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
        weighted += s.f1 * gold_c;
    }
    m.accuracy = static_cast<double>(correct) / m.total;
    m.weighted_f1 = weighted / m.total;

    // micro: pool tp/fp/fn over classes, optionally skipping one class
    int tp_sum = 0, fp_sum = 0, fn_sum = 0;
    for (int c = 0; c < num_labels; ++c) {
        if (c == exclude_label) continue;
        int tp = m.confusion[c][c];
        int gold_c = 0, pred_c = 0;
        for (int j = 0; j < num_labels; ++j) {
            gold_c += m.confusion[c][j];
            pred_c += m.confusion[j][c];
        }
        tp_sum += tp;
        fp_sum += pred_c - tp;
        fn_sum += gold_c - tp;
    }
    double denom = 2.0 * tp_sum + fp_sum + fn_sum;
    m.micro_f1 = denom > 0.0 ? 2.0 * tp_sum / denom : 0.0;
    return m;
}

nlohmann::json Metrics::to_json(const std::vector<std::string>& label_names) const {
    nlohmann::json j;
    j["accuracy"] = accuracy;
    j["weighted_f1"] = weighted_f1;
    j["micro_f1"] = micro_f1;
    j["total"] = total;
    j["confusion"] = confusion;
    j["per_class"] = nlohmann::json::array();
    for (size_t c = 0; c < per_class.size(); ++c) {
        nlohmann::json cj;
        cj["label"] = c < label_names.size() ? label_names[c] : std::to_string(c);
        cj["precision"] = per_class[c].precision;
        cj["recall"] = per_class[c].recall;
        cj["f1"] = per_class[c].f1;
        cj["support"] = per_class[c].support;
        j["per_class"].push_back(cj);
    }
    return j;
}

} // namespace erc
