#pragma once

#include <array>
#include <vector>

#include "sodboost/nn/layers.hpp"
#include "sodboost/ops.hpp"
#include "sodboost/resample.hpp"
#include "sodboost/rng.hpp"

namespace sodboost {

// Convolution block of the decoder: two 3x3 conv-bn-relu stages.
template <typename T>
struct ConvBlock {
    ConvBnRelu<T> first, second;

    void init(Rng& rng, int in_ch, int out_ch) {
        first.init(rng, in_ch, out_ch, 3);
        second.init(rng, out_ch, out_ch, 3);
    }

    Tensor<T> forward(const Ctx<T>& ctx, const Tensor<T>& x) {
        return second.forward(ctx, first.forward(ctx, x));
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        first.collect(prefix + ".c1", items);
        second.collect(prefix + ".c2", items);
    }
};

// Per-step decoder products: the four convolution-block outputs (auxiliary
// supervision targets, finest first) and the finest decoded feature.
template <typename T>
struct DecoderState {
    std::array<Tensor<T>, 4> cb_outputs;
    Tensor<T> final_feature;
};

// Top-down decoder over the four fused pyramid levels. The coarsest level is
// refined first; every finer level adds the upsampled coarser result before
// its convolution block. Each block output also feeds a zero-initialized
// 1x1 auxiliary logit head.
template <typename T>
struct Decoder {
    std::array<ConvBlock<T>, 4> blocks;
    std::array<Conv2dLayer<T>, 4> aux_heads;

    void init(Rng& rng, int channels) {
        for (int i = 0; i < 4; ++i) {
            blocks[i].init(rng, channels, channels);
            aux_heads[i].init(rng, channels, 1, 1, 1, 0, 1, /*bias=*/true, /*zero_init=*/true);
        }
    }

    DecoderState<T> forward(const Ctx<T>& ctx, const std::array<Tensor<T>, 4>& fused) {
        for (int i = 0; i < 3; ++i) {
            const int fine = fused[i].dim(2), coarse = fused[i + 1].dim(2);
            require_shape(fine == 2 * coarse || coarse == (fine + 1) / 2,
                          "decoder stride chain broken between levels " + std::to_string(i + 1) +
                              " and " + std::to_string(i + 2) + ": " +
                              shape_str(fused[i].shape()) + " vs " +
                              shape_str(fused[i + 1].shape()));
        }
        DecoderState<T> state;
        Tensor<T> up = blocks[3].forward(ctx, fused[3]);
        state.cb_outputs[3] = up;
        for (int i = 2; i >= 0; --i) {
            Tensor<T> merged =
                add(fused[i], bilinear_resize(up, fused[i].dim(2), fused[i].dim(3)));
            up = blocks[i].forward(ctx, merged);
            state.cb_outputs[i] = up;
        }
        state.final_feature = state.cb_outputs[0];
        return state;
    }

    // Auxiliary logit per level, upsampled to the supervision resolution.
    std::vector<Tensor<T>> aux_logits(const Ctx<T>& ctx, const DecoderState<T>& state,
                                      int out_h, int out_w) {
        std::vector<Tensor<T>> out;
        out.reserve(4);
        for (int i = 0; i < 4; ++i) {
            out.push_back(
                bilinear_resize(aux_heads[i].forward(ctx, state.cb_outputs[i]), out_h, out_w));
        }
        return out;
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        for (int i = 0; i < 4; ++i) {
            blocks[i].collect(prefix + ".cb" + std::to_string(i + 1), items);
            aux_heads[i].collect(prefix + ".aux" + std::to_string(i + 1), items);
        }
    }
};

// Multi-branch prediction head: each branch applies a dilated 3x3 conv with
// its own atrous rate and a zero-initialized 1x1 logit head. Forward always
// computes every branch; training selects one branch per step for gradient
// flow, the rest only contribute error weights.
template <typename T>
struct MhbHead {
    int branches = 4;
    std::vector<int> dilations;
    std::vector<ConvBnRelu<T>> convs;
    std::vector<Conv2dLayer<T>> heads;

    void init(Rng& rng, int channels, int n_branches) {
        require(n_branches >= 1, "prediction head needs at least one branch");
        branches = n_branches;
        dilations.resize(static_cast<size_t>(branches));
        for (int i = 0; i < branches; ++i) dilations[static_cast<size_t>(i)] = 1 << std::min(i, 6);
        convs.resize(static_cast<size_t>(branches));
        heads.resize(static_cast<size_t>(branches));
        for (int i = 0; i < branches; ++i) {
            convs[static_cast<size_t>(i)].init(rng, channels, channels, 3, 1, -1,
                                               dilations[static_cast<size_t>(i)]);
            heads[static_cast<size_t>(i)].init(rng, channels, 1, 1, 1, 0, 1, /*bias=*/true,
                                               /*zero_init=*/true);
        }
    }

    // Logit maps P_1..P_N at the given output resolution.
    std::vector<Tensor<T>> forward(const Ctx<T>& ctx, const Tensor<T>& feature, int out_h,
                                   int out_w) {
        const int fh = feature.dim(2), fw = feature.dim(3);
        std::vector<Tensor<T>> logits;
        logits.reserve(static_cast<size_t>(branches));
        for (int i = 0; i < branches; ++i) {
            const int d = dilations[static_cast<size_t>(i)];
            require(2 * d + 1 <= 4 * std::min(fh, fw),
                    "branch dilation " + std::to_string(d) +
                        " exceeds the usable receptive field for feature " +
                        shape_str(feature.shape()));
            Tensor<T> h = convs[static_cast<size_t>(i)].forward(ctx, feature);
            Tensor<T> logit = heads[static_cast<size_t>(i)].forward(ctx, h);
            logits.push_back(bilinear_resize(logit, out_h, out_w));
        }
        return logits;
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        for (int i = 0; i < branches; ++i) {
            convs[static_cast<size_t>(i)].collect(prefix + ".br" + std::to_string(i + 1), items);
            heads[static_cast<size_t>(i)].collect(prefix + ".hd" + std::to_string(i + 1), items);
        }
    }

    // Names of the parameters exclusive to one branch (for isolation checks).
    std::vector<std::string> branch_param_prefixes(const std::string& prefix, int branch) const {
        return {prefix + ".br" + std::to_string(branch + 1),
                prefix + ".hd" + std::to_string(branch + 1)};
    }
};

// Uniform draw of the branch trained this step (0-based).
inline int select_branch(Rng& rng, int branches) {
    return static_cast<int>(rng.uniform_int(branches));
}

// Inference rule: squash the summed branch logits. The sum is branch-order
// invariant bit for bit.
template <typename T>
Tensor<T> aggregate_inference(const std::vector<Tensor<T>>& logits) {
    require(!logits.empty(), "aggregate_inference: no branch logits");
    return sigmoid(sum_branches(logits));
}

}  // namespace sodboost
