#pragma once

#include <cmath>
#include <cstdint>

#include "sodboost/train/config.hpp"

namespace sodboost {

struct LearningRates {
    double backbone = 0.0;
    double heads = 0.0;
};

// Rise-then-fall schedule: linear warmup from zero over warmup_fraction of
// the run, then cosine decay to zero. The two pieces agree at the junction.
// Head groups run at head_lr_multiplier times the backbone rate.
inline LearningRates lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg) {
    require(total_steps > 0, "lr_at: total_steps is zero");
    require(step >= 0 && step < total_steps, "lr_at: step out of range");
    const double warmup = cfg.warmup_fraction * static_cast<double>(total_steps);
    double lr;
    if (static_cast<double>(step) < warmup) {
        lr = cfg.max_lr_backbone * static_cast<double>(step) / warmup;
    } else {
        const double span = static_cast<double>(total_steps) - warmup;
        const double t = span > 0.0 ? (static_cast<double>(step) - warmup) / span : 0.0;
        lr = cfg.max_lr_backbone * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
    }
    return {lr, lr * cfg.head_lr_multiplier};
}

}  // namespace sodboost
