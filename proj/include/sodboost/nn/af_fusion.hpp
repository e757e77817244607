#pragma once

#include "sodboost/nn/layers.hpp"
#include "sodboost/ops.hpp"
#include "sodboost/resample.hpp"

namespace sodboost {

// Cross-attention fusion of a transformer feature X (coarse, semantic) and a
// CNN feature Y (fine, detailed) at one pyramid level. Both inputs are first
// projected to a common width. The channel statistics of Y gate X, the
// spatial response of X gates Y, and the gated pair is blended with a
// residual combination of plain convolutions on both inputs.
template <typename T>
struct AfFusion {
    int channels = 0;
    Conv2dLayer<T> proj_x, proj_y;      // 1x1 projections to the common width
    Conv2dLayer<T> ca_fc1, ca_fc2;      // channel-gate bottleneck C -> C/4 -> C
    Conv2dLayer<T> sa_conv;             // spatial gate C -> 1
    ConvBnRelu<T> mid_block;            // 3x3 on the concatenated gated pair
    Conv2dLayer<T> conv_x, conv_y;      // 3x3 residual paths
    ConvBnRelu<T> out_block;

    void init(Rng& rng, int in_x, int in_y, int common) {
        require(common >= 4, "attention fusion requires at least 4 common channels, got " +
                                 std::to_string(common));
        channels = common;
        proj_x.init(rng, in_x, common, 1);
        proj_y.init(rng, in_y, common, 1);
        ca_fc1.init(rng, common, common / 4, 1);
        ca_fc2.init(rng, common / 4, common, 1);
        sa_conv.init(rng, common, 1, 1);
        mid_block.init(rng, 2 * common, common, 3);
        conv_x.init(rng, common, common, 3, 1, 1);
        conv_y.init(rng, common, common, 3, 1, 1);
        out_block.init(rng, common, common, 3);
    }

    // Per-channel gate in (0,1) derived from Y's global channel statistics;
    // broadcastable over X's spatial extent.
    Tensor<T> channel_attention(const Ctx<T>& ctx, const Tensor<T>& y_proj) {
        Tensor<T> s = global_avg_pool(y_proj);
        s = relu(ca_fc1.forward(ctx, s));
        return sigmoid(ca_fc2.forward(ctx, s));
    }

    // Per-pixel gate in (0,1) from X's content, upsampled to the target
    // spatial size; broadcastable over Y's channels.
    Tensor<T> spatial_attention(const Ctx<T>& ctx, const Tensor<T>& x_proj, int target_h,
                                int target_w) {
        require_shape(target_h >= x_proj.dim(2) && target_w >= x_proj.dim(3),
                      "spatial_attention: target smaller than the source feature");
        Tensor<T> g = sigmoid(sa_conv.forward(ctx, x_proj));
        if (target_h == g.dim(2) && target_w == g.dim(3)) return g;
        return bilinear_resize(g, target_h, target_w);
    }

    Tensor<T> forward(const Ctx<T>& ctx, const Tensor<T>& x_in, const Tensor<T>& y_in) {
        Tensor<T> x = proj_x.forward(ctx, x_in);
        Tensor<T> y = proj_y.forward(ctx, y_in);
        const int H = y.dim(2), W = y.dim(3);
        require_shape(H >= x.dim(2) && W >= x.dim(3),
                      "attention fusion expects the CNN feature to be at least as large as "
                      "the transformer feature, got " +
                          shape_str(x.shape()) + " vs " + shape_str(y.shape()));

        Tensor<T> gated_x = mul(x, channel_attention(ctx, y));
        Tensor<T> gated_y = mul(y, spatial_attention(ctx, x, H, W));
        Tensor<T> mid = mid_block.forward(
            ctx, concat<T>({bilinear_resize(gated_x, H, W), gated_y}, 1));

        Tensor<T> res_x = bilinear_resize(conv_x.forward(ctx, x), H, W);
        Tensor<T> res_y = conv_y.forward(ctx, y);
        return out_block.forward(ctx, add(add(res_x, mid), res_y));
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        proj_x.collect(prefix + ".px", items);
        proj_y.collect(prefix + ".py", items);
        ca_fc1.collect(prefix + ".ca1", items);
        ca_fc2.collect(prefix + ".ca2", items);
        sa_conv.collect(prefix + ".sa", items);
        mid_block.collect(prefix + ".mid", items);
        conv_x.collect(prefix + ".cx", items);
        conv_y.collect(prefix + ".cy", items);
        out_block.collect(prefix + ".out", items);
    }
};

// Ablation baseline: project both inputs to the common width, resize the
// coarse one and add.
template <typename T>
struct NaiveFusion {
    Conv2dLayer<T> proj_x, proj_y;

    void init(Rng& rng, int in_x, int in_y, int common) {
        proj_x.init(rng, in_x, common, 1);
        proj_y.init(rng, in_y, common, 1);
    }

    Tensor<T> forward(const Ctx<T>& ctx, const Tensor<T>& x_in, const Tensor<T>& y_in) {
        Tensor<T> x = proj_x.forward(ctx, x_in);
        Tensor<T> y = proj_y.forward(ctx, y_in);
        return add(bilinear_resize(x, y.dim(2), y.dim(3)), y);
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        proj_x.collect(prefix + ".px", items);
        proj_y.collect(prefix + ".py", items);
    }
};

}  // namespace sodboost
