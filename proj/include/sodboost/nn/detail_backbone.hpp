#pragma once

#include <array>

#include "sodboost/nn/layers.hpp"
#include "sodboost/ops.hpp"

namespace sodboost {

// Residual basic block (two 3x3 convs) with an optional 1x1 projection
// shortcut when the stride or width changes.
template <typename T>
struct BasicBlock {
    Conv2dLayer<T> conv1, conv2;
    BatchNorm2dLayer<T> bn1, bn2;
    bool has_proj = false;
    Conv2dLayer<T> proj;
    BatchNorm2dLayer<T> bnp;

    void init(Rng& rng, int in_ch, int out_ch, int stride) {
        conv1.init(rng, in_ch, out_ch, 3, stride, 1, 1, /*bias=*/false);
        bn1.init(out_ch);
        conv2.init(rng, out_ch, out_ch, 3, 1, 1, 1, /*bias=*/false);
        bn2.init(out_ch);
        has_proj = stride != 1 || in_ch != out_ch;
        if (has_proj) {
            proj.init(rng, in_ch, out_ch, 1, stride, 0, 1, /*bias=*/false);
            bnp.init(out_ch);
        }
    }

    Tensor<T> forward(const Ctx<T>& ctx, const Tensor<T>& x) {
        Tensor<T> h = relu(bn1.forward(ctx, conv1.forward(ctx, x)));
        h = bn2.forward(ctx, conv2.forward(ctx, h));
        Tensor<T> shortcut = has_proj ? bnp.forward(ctx, proj.forward(ctx, x)) : x;
        return relu(add(h, shortcut));
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        conv1.collect(prefix + ".conv1", items);
        bn1.collect(prefix + ".bn1", items);
        conv2.collect(prefix + ".conv2", items);
        bn2.collect(prefix + ".bn2", items);
        if (has_proj) {
            proj.collect(prefix + ".proj", items);
            bnp.collect(prefix + ".bnp", items);
        }
    }
};

// The four per-stage feature maps of one branch, finest first.
template <typename T>
using FeaturePyramid = std::array<Tensor<T>, 4>;

struct DetailConfig {
    std::array<int, 4> widths{16, 32, 64, 128};
    int blocks_per_stage = 2;
};

// High-resolution residual CNN. The stem is a single stride-2 conv with no
// pooling, so the stage outputs sit at 1/2, 1/4, 1/8 and 1/16 of the input
// resolution with strictly increasing widths.
template <typename T>
struct DetailBackbone {
    DetailConfig cfg;
    Conv2dLayer<T> stem;
    BatchNorm2dLayer<T> stem_bn;
    std::array<std::vector<BasicBlock<T>>, 4> stages;

    void init(Rng& rng, const DetailConfig& config = {}) {
        cfg = config;
        for (int i = 0; i + 1 < 4; ++i) {
            require(cfg.widths[i] < cfg.widths[i + 1],
                    "detail backbone widths must strictly increase with depth");
        }
        stem.init(rng, 3, cfg.widths[0], 3, 2, 1, 1, /*bias=*/false);
        stem_bn.init(cfg.widths[0]);
        int in_ch = cfg.widths[0];
        for (int s = 0; s < 4; ++s) {
            const int out_ch = cfg.widths[s];
            const int first_stride = s == 0 ? 1 : 2;
            stages[s].resize(cfg.blocks_per_stage);
            stages[s][0].init(rng, in_ch, out_ch, first_stride);
            for (int b = 1; b < cfg.blocks_per_stage; ++b) {
                stages[s][b].init(rng, out_ch, out_ch, 1);
            }
            in_ch = out_ch;
        }
    }

    FeaturePyramid<T> forward(const Ctx<T>& ctx, const Tensor<T>& image) {
        require_shape(image.rank() == 4 && image.dim(1) == 3,
                      "detail backbone expects an NCHW image with 3 channels, got " +
                          shape_str(image.shape()));
        require_shape(image.dim(2) % 32 == 0 && image.dim(3) % 32 == 0,
                      "detail backbone input size must be a multiple of 32, got " +
                          shape_str(image.shape()));
        Tensor<T> x = relu(stem_bn.forward(ctx, stem.forward(ctx, image)));
        FeaturePyramid<T> pyramid;
        for (int s = 0; s < 4; ++s) {
            for (auto& block : stages[s]) x = block.forward(ctx, x);
            pyramid[s] = x;
        }
        return pyramid;
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        stem.collect(prefix + ".stem", items);
        stem_bn.collect(prefix + ".stem_bn", items);
        for (int s = 0; s < 4; ++s) {
            for (size_t b = 0; b < stages[s].size(); ++b) {
                stages[s][b].collect(prefix + ".s" + std::to_string(s + 1) + ".b" +
                                         std::to_string(b + 1),
                                     items);
            }
        }
    }
};

}  // namespace sodboost
