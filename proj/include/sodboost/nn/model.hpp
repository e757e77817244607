#pragma once

#include <array>
#include <vector>

#include "sodboost/nn/af_fusion.hpp"
#include "sodboost/nn/decoder.hpp"
#include "sodboost/nn/detail_backbone.hpp"
#include "sodboost/nn/semantic_backbone.hpp"

namespace sodboost {

struct ModelConfig {
    int detail_input = 64;     // multiple of 32
    int semantic_input = 16;   // multiple of the patch size
    DetailConfig detail;
    SemanticConfig semantic;
    int fusion_channels = 64;
    int branches = 4;
    bool use_detail = true;
    bool use_semantic = true;
    bool use_af = true;

    void validate() const {
        require(detail_input % 32 == 0, "detail input size must be a multiple of 32, got " +
                                            std::to_string(detail_input));
        require(use_detail || use_semantic, "at least one branch must be enabled");
        require(branches >= 1, "branch count must be >= 1");
    }
};

// The full network: detail CNN and/or semantic transformer pyramids, per-level
// fusion, top-down decoder with auxiliary heads, and the multi-branch
// prediction head. Images enter in [0,1]; the model normalizes them to
// mean 0.5 / std 0.5 per channel.
template <typename T>
struct BilateralModel {
    ModelConfig cfg;
    DetailBackbone<T> detail;
    SemanticBackbone<T> semantic;
    std::array<AfFusion<T>, 4> af;
    std::array<NaiveFusion<T>, 4> naive;
    std::array<Conv2dLayer<T>, 4> single_proj;
    Decoder<T> decoder;
    MhbHead<T> mhb;

    void init(Rng& rng, const ModelConfig& config) {
        cfg = config;
        cfg.semantic.input_size = cfg.semantic_input;
        cfg.validate();
        if (cfg.use_detail) detail.init(rng, cfg.detail);
        if (cfg.use_semantic) semantic.init(rng, cfg.semantic);
        const int C = cfg.fusion_channels;
        for (int i = 0; i < 4; ++i) {
            const int cx = cfg.semantic.dims[static_cast<size_t>(i)];
            const int cy = cfg.detail.widths[static_cast<size_t>(i)];
            if (cfg.use_detail && cfg.use_semantic) {
                if (cfg.use_af) {
                    af[static_cast<size_t>(i)].init(rng, cx, cy, C);
                } else {
                    naive[static_cast<size_t>(i)].init(rng, cx, cy, C);
                }
            } else {
                single_proj[static_cast<size_t>(i)].init(rng, cfg.use_detail ? cy : cx, C, 1);
            }
        }
        decoder.init(rng, C);
        mhb.init(rng, C, cfg.branches);
    }

    struct Outputs {
        std::vector<Tensor<T>> aux_logits;     // per decoder level, at image size
        std::vector<Tensor<T>> branch_logits;  // per branch, at image size
    };

    Outputs forward(const Ctx<T>& ctx, const Tensor<T>& image) {
        require_shape(image.rank() == 4 && image.dim(1) == 3,
                      "model expects an NCHW image batch with 3 channels, got " +
                          shape_str(image.shape()));
        const int H = image.dim(2), W = image.dim(3);
        Tensor<T> x = mul_scalar(add_scalar(image, T(-0.5)), T(2));

        FeaturePyramid<T> det{}, sem{};
        if (cfg.use_detail) det = detail.forward(ctx, x);
        if (cfg.use_semantic) {
            Tensor<T> small = downsample_input(x, cfg.semantic_input, cfg.semantic.patch);
            sem = semantic.forward(ctx, small);
        }

        std::array<Tensor<T>, 4> fused;
        for (int i = 0; i < 4; ++i) {
            const auto k = static_cast<size_t>(i);
            if (cfg.use_detail && cfg.use_semantic) {
                fused[k] = cfg.use_af ? af[k].forward(ctx, sem[k], det[k])
                                      : naive[k].forward(ctx, sem[k], det[k]);
            } else if (cfg.use_detail) {
                fused[k] = single_proj[k].forward(ctx, det[k]);
            } else {
                fused[k] = single_proj[k].forward(ctx, sem[k]);
            }
        }

        DecoderState<T> state = decoder.forward(ctx, fused);
        Outputs out;
        out.aux_logits = decoder.aux_logits(ctx, state, H, W);
        out.branch_logits = mhb.forward(ctx, state.final_feature, H, W);
        return out;
    }

    // Inference: saliency map in [0,1] at the input resolution.
    Tensor<T> predict(const Tensor<T>& image) {
        Ctx<T> ctx;  // no tape, eval statistics
        Outputs out = forward(ctx, image);
        return aggregate_inference(out.branch_logits);
    }

    void collect(ModuleItems<T>& items) {
        if (cfg.use_detail) detail.collect("detail", items);
        if (cfg.use_semantic) semantic.collect("semantic", items);
        for (int i = 0; i < 4; ++i) {
            const auto k = static_cast<size_t>(i);
            const std::string p = "fusion" + std::to_string(i + 1);
            if (cfg.use_detail && cfg.use_semantic) {
                if (cfg.use_af) {
                    af[k].collect(p, items);
                } else {
                    naive[k].collect(p, items);
                }
            } else {
                single_proj[k].collect(p, items);
            }
        }
        decoder.collect("decoder", items);
        mhb.collect("mhb", items);
    }
};

}  // namespace sodboost
