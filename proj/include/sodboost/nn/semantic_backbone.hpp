#pragma once

#include <array>
#include <vector>

#include "sodboost/nn/detail_backbone.hpp"
#include "sodboost/nn/layers.hpp"
#include "sodboost/resample.hpp"
#include "sodboost/window.hpp"

namespace sodboost {

namespace detail {

// NCHW map <-> (B, H*W, C) token sequence, tokens in raster order.
template <typename T>
Tensor<T> to_tokens(const Tensor<T>& x) {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    return reshape(transpose(x, {0, 2, 3, 1}), Shape{B, H * W, C});
}

template <typename T>
Tensor<T> to_map(const Tensor<T>& t, int H, int W) {
    const int B = t.dim(0), C = t.dim(2);
    return transpose(reshape(t, Shape{B, H, W, C}), {0, 3, 1, 2});
}

}  // namespace detail

// Pre-norm transformer block with windowed multi-head attention, learned
// relative position bias and a 4x MLP. The shifted variant cyclically rolls
// the grid by half a window and masks attention across the wrap seam; when
// the grid is no larger than one window the shift is skipped and the block
// reduces to plain window attention.
template <typename T>
struct WindowBlock {
    int dim = 0, heads = 1, grid = 0, window = 1, shift = 0, padded = 0;
    LayerNormLayer<T> ln1, ln2;
    LinearLayer<T> q_proj, k_proj, v_proj, out_proj;
    Parameter<T> rel_table;
    std::vector<int> rel_index;
    Tensor<T> mask;  // (windows, 1, tokens, tokens); defined only when shifted
    LinearLayer<T> mlp_fc1, mlp_fc2;

    void init(Rng& rng, int dim_, int heads_, int grid_, int window_cfg, bool shifted,
              int mlp_ratio = 4) {
        dim = dim_;
        heads = heads_;
        grid = grid_;
        window = std::min(window_cfg, grid);
        shift = (shifted && grid > window) ? window / 2 : 0;
        padded = (grid + window - 1) / window * window;
        ln1.init(dim);
        ln2.init(dim);
        q_proj.init(rng, dim, dim);
        k_proj.init(rng, dim, dim);
        v_proj.init(rng, dim, dim);
        out_proj.init(rng, dim, dim);
        const int span = 2 * window - 1;
        rel_table.init(Shape{heads, span * span},
                       init::normal<T>(rng, static_cast<int64_t>(heads) * span * span, 0.02));
        rel_index = relative_position_index(window);
        if (shift > 0) mask = shifted_window_mask<T>(padded, padded, window, shift);
        mlp_fc1.init(rng, dim, mlp_ratio * dim);
        mlp_fc2.init(rng, mlp_ratio * dim, dim);
    }

    Tensor<T> forward(const Ctx<T>& ctx, const Tensor<T>& x) {
        const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int tokens = window * window;

        Tensor<T> t = detail::to_tokens(x);
        Tensor<T> m = detail::to_map(ln1.forward(ctx, t), H, W);
        if (padded > H || padded > W) m = pad_edge2d(m, padded - H, padded - W);
        if (shift > 0) m = roll2d(m, -shift, -shift);
        Tensor<T> wt = window_partition(m, window);  // (B*nW, tokens, dim)

        Tensor<T> bias = reshape(bias_from_table(ctx.use(rel_table), rel_index, tokens),
                                 Shape{1, heads, tokens, tokens});
        if (mask.defined()) {
            const int nw = mask.dim(0);
            Tensor<T> combined = add(bias, mask);  // (nW, heads, tokens, tokens)
            combined = reshape(combined, Shape{1, nw, heads, tokens, tokens});
            combined = broadcast_to(combined, Shape{B, nw, heads, tokens, tokens});
            bias = reshape(combined, Shape{B * nw, heads, tokens, tokens});
        }
        Tensor<T> att = attention(q_proj.forward(ctx, wt), k_proj.forward(ctx, wt),
                                  v_proj.forward(ctx, wt), heads,
                                  std::optional<Tensor<T>>(bias));
        att = out_proj.forward(ctx, att);
        Tensor<T> m2 = window_merge(att, window, padded, padded);
        if (shift > 0) m2 = roll2d(m2, shift, shift);
        if (padded > H || padded > W) m2 = crop2d(m2, H, W);
        Tensor<T> y = add(x, m2);

        Tensor<T> t2 = ln2.forward(ctx, detail::to_tokens(y));
        Tensor<T> mm = mlp_fc2.forward(ctx, relu(mlp_fc1.forward(ctx, t2)));
        return add(y, detail::to_map(mm, H, W));
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        ln1.collect(prefix + ".ln1", items);
        q_proj.collect(prefix + ".q", items);
        k_proj.collect(prefix + ".k", items);
        v_proj.collect(prefix + ".v", items);
        out_proj.collect(prefix + ".o", items);
        items.add_param(prefix + ".relpos", rel_table);
        ln2.collect(prefix + ".ln2", items);
        mlp_fc1.collect(prefix + ".mlp1", items);
        mlp_fc2.collect(prefix + ".mlp2", items);
    }
};

// Token downsampling: gathers 2x2 neighborhoods (edge-padding odd grids),
// normalizes and linearly projects 4C -> out channels. Output grid size is
// ceil(input / 2).
template <typename T>
struct PatchMerge {
    LayerNormLayer<T> norm;
    LinearLayer<T> reduce;
    int in_ch = 0, out_ch = 0;

    void init(Rng& rng, int in, int out) {
        in_ch = in;
        out_ch = out;
        norm.init(4 * in);
        reduce.init(rng, 4 * in, out, /*bias=*/false);
    }

    Tensor<T> forward(const Ctx<T>& ctx, const Tensor<T>& x) {
        Tensor<T> m = pad_edge2d(x, x.dim(2) % 2, x.dim(3) % 2);
        m = space_to_depth2(m);
        const int H = m.dim(2), W = m.dim(3);
        Tensor<T> t = norm.forward(ctx, detail::to_tokens(m));
        return detail::to_map(reduce.forward(ctx, t), H, W);
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        norm.collect(prefix + ".norm", items);
        reduce.collect(prefix + ".reduce", items);
    }
};

struct SemanticConfig {
    int input_size = 16;
    int patch = 2;
    int window = 4;
    std::array<int, 4> dims{32, 64, 128, 256};
    std::array<int, 4> heads{1, 2, 4, 8};
    int blocks_per_stage = 2;  // alternating plain / shifted
};

// Low-resolution windowed-attention branch. Each stage runs a plain window
// block followed by a shifted one, with patch merging in between; stage
// outputs are restored to 2-D maps.
template <typename T>
struct SemanticBackbone {
    SemanticConfig cfg;
    Conv2dLayer<T> embed;
    LayerNormLayer<T> embed_norm;
    std::array<std::vector<WindowBlock<T>>, 4> stages;
    std::array<PatchMerge<T>, 3> merges;
    std::array<int, 4> grids{};

    void init(Rng& rng, const SemanticConfig& config = {}) {
        cfg = config;
        require(cfg.input_size % cfg.patch == 0,
                "semantic input size " + std::to_string(cfg.input_size) +
                    " is not a multiple of patch size " + std::to_string(cfg.patch));
        embed.init(rng, 3, cfg.dims[0], cfg.patch, cfg.patch, 0, 1, /*bias=*/true);
        embed_norm.init(cfg.dims[0]);
        int grid = cfg.input_size / cfg.patch;
        for (int s = 0; s < 4; ++s) {
            grids[s] = grid;
            stages[s].resize(cfg.blocks_per_stage);
            for (int b = 0; b < cfg.blocks_per_stage; ++b) {
                stages[s][b].init(rng, cfg.dims[s], cfg.heads[s], grid, cfg.window,
                                  /*shifted=*/b % 2 == 1);
            }
            if (s < 3) {
                merges[s].init(rng, cfg.dims[s], cfg.dims[s + 1]);
                grid = (grid + 1) / 2;
            }
        }
    }

    FeaturePyramid<T> forward(const Ctx<T>& ctx, const Tensor<T>& image) {
        require_shape(image.rank() == 4 && image.dim(1) == 3,
                      "semantic backbone expects an NCHW image with 3 channels");
        require_shape(image.dim(2) == cfg.input_size && image.dim(3) == cfg.input_size,
                      "semantic backbone expects a " + std::to_string(cfg.input_size) + "x" +
                          std::to_string(cfg.input_size) + " input, got " +
                          shape_str(image.shape()));
        Tensor<T> x = embed.forward(ctx, image);
        const int g0 = x.dim(2);
        x = detail::to_map(embed_norm.forward(ctx, detail::to_tokens(x)), g0, x.dim(3));
        FeaturePyramid<T> pyramid;
        for (int s = 0; s < 4; ++s) {
            for (auto& block : stages[s]) x = block.forward(ctx, x);
            pyramid[s] = x;
            if (s < 3) x = merges[s].forward(ctx, x);
        }
        return pyramid;
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        embed.collect(prefix + ".embed", items);
        embed_norm.collect(prefix + ".embed_norm", items);
        for (int s = 0; s < 4; ++s) {
            for (size_t b = 0; b < stages[s].size(); ++b) {
                stages[s][b].collect(prefix + ".s" + std::to_string(s + 1) + ".b" +
                                         std::to_string(b + 1),
                                     items);
            }
            if (s < 3) {
                merges[s].collect(prefix + ".merge" + std::to_string(s + 1), items);
            }
        }
    }
};

// Bilinear reduction of the full-resolution image to the semantic branch's
// fixed square input size.
template <typename T>
Tensor<T> downsample_input(const Tensor<T>& image, int target, int patch = 1) {
    require_shape(image.rank() == 4, "downsample_input: image must be NCHW");
    require(target <= image.dim(2) && target <= image.dim(3),
            "downsample_input: target exceeds source size");
    require(target >= patch, "downsample_input: target smaller than patch size");
    return bilinear_resize(image, target, target);
}

}  // namespace sodboost
