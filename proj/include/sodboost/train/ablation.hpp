#pragma once

#include <ostream>
#include <string>

#include "sodboost/train/trainer.hpp"

namespace sodboost {

// Named network variants for the ablation harness. Single-branch and plain
// fusion variants run one prediction head; the boosting row enables both the
// branch decoupling and the error weights; the aspp row keeps the branches
// but back-propagates them synchronously.
inline const std::vector<std::string>& ablation_modes() {
    static const std::vector<std::string> modes = {
        "detail-only", "semantic-only", "bilateral", "+af",
        "+mhb2",       "+mhb3",         "+mhb4",     "+mhb5",
        "+bl",         "aspp"};
    return modes;
}

inline TrainConfig ablation_config(const TrainConfig& base, const std::string& mode) {
    TrainConfig cfg = base;
    cfg.use_detail = true;
    cfg.use_semantic = true;
    cfg.use_af = true;
    cfg.boost_weights = false;
    cfg.aspp_sync = false;
    cfg.branches = 1;
    if (mode == "detail-only") {
        cfg.use_semantic = false;
    } else if (mode == "semantic-only") {
        cfg.use_detail = false;
    } else if (mode == "bilateral") {
        cfg.use_af = false;
    } else if (mode == "+af") {
        // defaults
    } else if (mode.rfind("+mhb", 0) == 0) {
        const std::string n = mode.substr(4);
        require(!n.empty() && n.find_first_not_of("0123456789") == std::string::npos,
                "unknown ablation mode '" + mode + "'");
        cfg.branches = std::stoi(n);
        require(cfg.branches >= 1 && cfg.branches <= 8,
                "ablation branch count out of range in '" + mode + "'");
    } else if (mode == "+bl") {
        cfg.branches = 4;
        cfg.boost_weights = true;
    } else if (mode == "aspp") {
        cfg.branches = 4;
        cfg.aspp_sync = true;
    } else {
        throw ConfigError("unknown ablation mode '" + mode + "'");
    }
    return cfg;
}

struct AblationResult {
    std::string mode;
    TrainConfig config;
    EvalReport report;
};

// Trains the variant from scratch on the train split and scores it on the
// held-out split.
template <typename T = float>
AblationResult run_ablation(const std::string& mode, const TrainConfig& base,
                            const DatasetManifest& train_data,
                            const DatasetManifest& eval_data, std::ostream* csv = nullptr) {
    AblationResult result;
    result.mode = mode;
    result.config = ablation_config(base, mode);
    Trainer<T> trainer(result.config, train_data);
    trainer.run(trainer.total_steps(), csv);
    result.report = evaluate_model(trainer.model(), eval_data,
                                   result.config.detail_input_size);
    return result;
}

}  // namespace sodboost
