#pragma once

#include <vector>

#include "sodboost/ops.hpp"

namespace sodboost {

// Predictions are clamped away from {0,1} before any logarithm; the loss
// surface is otherwise undefined at exactly correct/incorrect pixels.
constexpr double kPredictionEps = 1e-7;

template <typename T>
Tensor<T> clamp_prob(const Tensor<T>& p) {
    return clamp(p, static_cast<T>(kPredictionEps), T(1) - static_cast<T>(kPredictionEps));
}

// Per-pixel binary cross entropy: -(g*log(p) + (1-g)*log(1-p)).
// p must already be clamped into [eps, 1-eps].
template <typename T>
Tensor<T> bce_map(const Tensor<T>& p, const Tensor<T>& g) {
    require_shape(p.shape() == g.shape(), "bce_map: shape mismatch " + shape_str(p.shape()) +
                                              " vs " + shape_str(g.shape()));
    for (const T v : p.values()) {
        require(v > T(0) && v < T(1),
                "bce_map: prediction contains an unclamped value at exactly 0 or 1");
    }
    return neg(add(mul(g, log(p)), mul(one_minus(g), log(one_minus(p)))));
}

// Weight-normalized mean of the BCE map.
template <typename T>
Tensor<T> wbce(const Tensor<T>& p, const Tensor<T>& g, const Tensor<T>& w) {
    require_shape(p.shape() == w.shape(), "wbce: weight shape mismatch");
    Tensor<T> denom = sum(w);
    require(denom.value() != T(0), "wbce: weight sum is zero");
    return div(sum(mul(bce_map(p, g), w)), denom);
}

// Weighted intersection-over-union loss:
//   1 - S(p*g*w) / (S((p+g)*w) - S(p*g*w))
// An all-empty pair (no foreground predicted or labeled) is a perfect match
// and scores 0.
template <typename T>
Tensor<T> wiou(const Tensor<T>& p, const Tensor<T>& g, const Tensor<T>& w) {
    require_shape(p.shape() == g.shape() && p.shape() == w.shape(),
                  "wiou: shape mismatch");
    Tensor<T> inter = sum(mul(mul(p, g), w));
    Tensor<T> uni = sub(sum(mul(add(p, g), w)), inter);
    if (uni.value() == T(0)) return Tensor<T>::scalar(T(0));
    return one_minus(div(inter, uni));
}

// Boosting loss: weighted BCE plus weighted IoU.
template <typename T>
Tensor<T> boost_loss(const Tensor<T>& p, const Tensor<T>& g, const Tensor<T>& w) {
    return add(wbce(p, g, w), wiou(p, g, w));
}

// Per-pixel error weight for the selected branch: 1 plus the BCE maps of all
// other branches. Every input is detached, so the weight is a constant with
// respect to gradients and contributes no tape nodes during training.
template <typename T>
Tensor<T> boosting_weight(const std::vector<Tensor<T>>& branch_logits, int selected,
                          const Tensor<T>& g) {
    require(selected >= 0 && selected < static_cast<int>(branch_logits.size()),
            "boosting_weight: selected branch out of range");
    const Tensor<T> gt = g.detach();
    for (const auto& l : branch_logits) {
        require_shape(l.shape() == gt.shape(),
                      "boosting_weight: prediction/mask shape mismatch " +
                          shape_str(l.shape()) + " vs " + shape_str(gt.shape()));
    }
    Tensor<T> w = Tensor<T>::full(gt.shape(), T(1));
    for (size_t i = 0; i < branch_logits.size(); ++i) {
        if (static_cast<int>(i) == selected) continue;
        Tensor<T> p = clamp_prob(sigmoid(branch_logits[i].detach()));
        w = add(w, bce_map(p, gt));
    }
    return w;
}

template <typename T>
struct LossBreakdown {
    Tensor<T> total;               // scalar, on the training tape
    Tensor<T> boosted;             // selected-branch term
    std::vector<Tensor<T>> aux;    // one scalar per supervised decoder level
    T boosted_wbce = T(0);         // logged components
    T boosted_wiou = T(0);

    T aux_sum() const {
        T s = T(0);
        for (const auto& a : aux) s += a.value();
        return s;
    }
};

// Total training loss with an explicit weight map for the selected branch:
// unweighted BCE+IoU on every auxiliary level plus the weighted boosting
// loss on the selected branch. Logits are squashed and clamped here.
template <typename T>
LossBreakdown<T> total_loss(const std::vector<Tensor<T>>& aux_logits,
                            const std::vector<Tensor<T>>& branch_logits, int selected,
                            const Tensor<T>& g, const Tensor<T>& weight) {
    require(!aux_logits.empty(), "total_loss: no auxiliary maps to supervise");
    require(selected >= 0 && selected < static_cast<int>(branch_logits.size()),
            "total_loss: selected branch out of range");

    LossBreakdown<T> breakdown;
    const Tensor<T> ones = Tensor<T>::full(g.shape(), T(1));
    Tensor<T> total;
    for (const auto& logit : aux_logits) {
        Tensor<T> p = clamp_prob(sigmoid(logit));
        Tensor<T> li = add(wbce(p, g, ones), wiou(p, g, ones));
        breakdown.aux.push_back(li);
        total = total.defined() ? add(total, li) : li;
    }

    Tensor<T> p_sel = clamp_prob(sigmoid(branch_logits[static_cast<size_t>(selected)]));
    Tensor<T> lb_bce = wbce(p_sel, g, weight);
    Tensor<T> lb_iou = wiou(p_sel, g, weight);
    breakdown.boosted_wbce = lb_bce.value();
    breakdown.boosted_wiou = lb_iou.value();
    breakdown.boosted = add(lb_bce, lb_iou);
    breakdown.total = add(total, breakdown.boosted);
    return breakdown;
}

// Convenience overload computing the boosting weight from the non-selected
// branches (all-ones when boosting is disabled).
template <typename T>
LossBreakdown<T> total_loss(const std::vector<Tensor<T>>& aux_logits,
                            const std::vector<Tensor<T>>& branch_logits, int selected,
                            const Tensor<T>& g, bool use_boost_weights) {
    Tensor<T> w = use_boost_weights ? boosting_weight(branch_logits, selected, g)
                                    : Tensor<T>::full(g.shape(), T(1));
    return total_loss(aux_logits, branch_logits, selected, g, w);
}

}  // namespace sodboost
