#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace erc {

struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int support = 0;
};

struct Metrics {
    std::vector<std::vector<int>> confusion; // [gold][pred]
    std::vector<ClassScore> per_class;
    double accuracy = 0.0;
    double weighted_f1 = 0.0; // support-weighted mean of per-class F1
    double micro_f1 = 0.0;    // pooled decisions; equals accuracy unless a class is excluded
    int total = 0;

    nlohmann::json to_json(const std::vector<std::string>& label_names = {}) const;
};

// gold/pred are label ids in [0, num_labels). exclude_label < 0 disables the
// micro-F1 class exclusion.
Metrics compute_metrics(const std::vector<int>& gold, const std::vector<int>& pred, int num_labels,
                        int exclude_label = -1);

} // namespace erc
