#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "sodboost/ops.hpp"
#include "sodboost/tensor.hpp"

namespace sodboost {

// Rearranges an NCHW map into per-window token sequences:
// (B, C, H, W) -> (B * nWin, window^2, C), windows in raster order and tokens
// in raster order within each window. Spatial dims must be divisible by the
// window; callers pad beforehand when they are not.
template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, int window) {
    require_shape(x.rank() == 4, "window_partition: input must be NCHW");
    require(window >= 1, "window_partition: window must be >= 1");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require_shape(H % window == 0 && W % window == 0,
                  "window_partition: spatial size " + shape_str(x.shape()) +
                      " not divisible by window " + std::to_string(window));
    const int nwh = H / window, nww = W / window;
    const int tokens = window * window;
    Tensor<T> out = Tensor<T>::alloc(Shape{B * nwh * nww, tokens, C});
    const T* xv = x.data();
    T* ov = out.mutable_data();
    for (int b = 0; b < B; ++b) {
        for (int wy = 0; wy < nwh; ++wy) {
            for (int wx = 0; wx < nww; ++wx) {
                const int64_t wbase =
                    (static_cast<int64_t>(b) * nwh * nww + wy * nww + wx) *
                    static_cast<int64_t>(tokens) * C;
                for (int ty = 0; ty < window; ++ty) {
                    for (int tx = 0; tx < window; ++tx) {
                        const int64_t tbase = wbase + (static_cast<int64_t>(ty) * window + tx) * C;
                        const int iy = wy * window + ty;
                        const int ix = wx * window + tx;
                        for (int c = 0; c < C; ++c) {
                            ov[tbase + c] =
                                xv[((static_cast<int64_t>(b) * C + c) * H + iy) * W + ix];
                        }
                    }
                }
            }
        }
    }

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int64_t xn = x.size();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gx(static_cast<size_t>(xn));
            for (int b = 0; b < B; ++b) {
                for (int wy = 0; wy < nwh; ++wy) {
                    for (int wx = 0; wx < nww; ++wx) {
                        const int64_t wbase =
                            (static_cast<int64_t>(b) * nwh * nww + wy * nww + wx) *
                            static_cast<int64_t>(tokens) * C;
                        for (int ty = 0; ty < window; ++ty) {
                            for (int tx = 0; tx < window; ++tx) {
                                const int64_t tbase =
                                    wbase + (static_cast<int64_t>(ty) * window + tx) * C;
                                const int iy = wy * window + ty;
                                const int ix = wx * window + tx;
                                for (int c = 0; c < C; ++c) {
                                    gx[((static_cast<int64_t>(b) * C + c) * H + iy) * W + ix] =
                                        g[static_cast<size_t>(tbase + c)];
                                }
                            }
                        }
                    }
                }
            }
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

// Exact inverse of window_partition for the given original spatial size.
template <typename T>
Tensor<T> window_merge(const Tensor<T>& x, int window, int H, int W) {
    require_shape(x.rank() == 3, "window_merge: input must be (windows, tokens, C)");
    require_shape(H % window == 0 && W % window == 0,
                  "window_merge: spatial size not divisible by window");
    const int nwh = H / window, nww = W / window;
    const int tokens = window * window;
    require_shape(x.dim(1) == tokens, "window_merge: token count mismatch");
    require_shape(x.dim(0) % (nwh * nww) == 0, "window_merge: window count mismatch");
    const int B = x.dim(0) / (nwh * nww);
    const int C = x.dim(2);
    Tensor<T> out = Tensor<T>::alloc(Shape{B, C, H, W});
    const T* xv = x.data();
    T* ov = out.mutable_data();
    for (int b = 0; b < B; ++b) {
        for (int wy = 0; wy < nwh; ++wy) {
            for (int wx = 0; wx < nww; ++wx) {
                const int64_t wbase =
                    (static_cast<int64_t>(b) * nwh * nww + wy * nww + wx) *
                    static_cast<int64_t>(tokens) * C;
                for (int ty = 0; ty < window; ++ty) {
                    for (int tx = 0; tx < window; ++tx) {
                        const int64_t tbase = wbase + (static_cast<int64_t>(ty) * window + tx) * C;
                        const int iy = wy * window + ty;
                        const int ix = wx * window + tx;
                        for (int c = 0; c < C; ++c) {
                            ov[((static_cast<int64_t>(b) * C + c) * H + iy) * W + ix] =
                                xv[tbase + c];
                        }
                    }
                }
            }
        }
    }

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int64_t xn = x.size();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gx(static_cast<size_t>(xn));
            for (int b = 0; b < B; ++b) {
                for (int wy = 0; wy < nwh; ++wy) {
                    for (int wx = 0; wx < nww; ++wx) {
                        const int64_t wbase =
                            (static_cast<int64_t>(b) * nwh * nww + wy * nww + wx) *
                            static_cast<int64_t>(tokens) * C;
                        for (int ty = 0; ty < window; ++ty) {
                            for (int tx = 0; tx < window; ++tx) {
                                const int64_t tbase =
                                    wbase + (static_cast<int64_t>(ty) * window + tx) * C;
                                const int iy = wy * window + ty;
                                const int ix = wx * window + tx;
                                for (int c = 0; c < C; ++c) {
                                    gx[static_cast<size_t>(tbase + c)] =
                                        g[((static_cast<int64_t>(b) * C + c) * H + iy) * W + ix];
                                }
                            }
                        }
                    }
                }
            }
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

// Gathers 2x2 neighborhoods into channels: (B,C,H,W) -> (B,4C,H/2,W/2) with
// block order (0,0),(0,1),(1,0),(1,1). Feeds patch merging.
template <typename T>
Tensor<T> space_to_depth2(const Tensor<T>& x) {
    require_shape(x.rank() == 4, "space_to_depth2: input must be NCHW");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require_shape(H % 2 == 0 && W % 2 == 0, "space_to_depth2: spatial size must be even");
    const int OH = H / 2, OW = W / 2;
    Tensor<T> out = Tensor<T>::alloc(Shape{B, 4 * C, OH, OW});
    const T* xv = x.data();
    T* ov = out.mutable_data();
    const int64_t in_plane = static_cast<int64_t>(H) * W;
    const int64_t out_plane = static_cast<int64_t>(OH) * OW;
    for (int b = 0; b < B; ++b) {
        for (int blk = 0; blk < 4; ++blk) {
            const int dy = blk / 2, dx = blk % 2;
            for (int c = 0; c < C; ++c) {
                const T* src = xv + (static_cast<int64_t>(b) * C + c) * in_plane;
                T* dst = ov + (static_cast<int64_t>(b) * 4 * C + blk * C + c) * out_plane;
                for (int oy = 0; oy < OH; ++oy) {
                    const T* srow = src + static_cast<int64_t>(2 * oy + dy) * W + dx;
                    for (int ox = 0; ox < OW; ++ox) dst[static_cast<int64_t>(oy) * OW + ox] = srow[2 * ox];
                }
            }
        }
    }

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int64_t xn = x.size();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gx(static_cast<size_t>(xn));
            for (int b = 0; b < B; ++b) {
                for (int blk = 0; blk < 4; ++blk) {
                    const int dy = blk / 2, dx = blk % 2;
                    for (int c = 0; c < C; ++c) {
                        T* dst = gx.data() + (static_cast<int64_t>(b) * C + c) * in_plane;
                        const T* src =
                            g.data() + (static_cast<int64_t>(b) * 4 * C + blk * C + c) * out_plane;
                        for (int oy = 0; oy < OH; ++oy) {
                            T* drow = dst + static_cast<int64_t>(2 * oy + dy) * W + dx;
                            for (int ox = 0; ox < OW; ++ox) {
                                drow[2 * ox] = src[static_cast<int64_t>(oy) * OW + ox];
                            }
                        }
                    }
                }
            }
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

// Expands a learned relative-position table (heads, table_len) into a dense
// (heads, tokens, tokens) bias using the precomputed index map; gradients
// scatter back into the table.
template <typename T>
Tensor<T> bias_from_table(const Tensor<T>& table, const std::vector<int>& index, int tokens) {
    require_shape(table.rank() == 2, "bias_from_table: table must be (heads, entries)");
    require_shape(static_cast<int>(index.size()) == tokens * tokens,
                  "bias_from_table: index size mismatch");
    const int heads = table.dim(0);
    const int entries = table.dim(1);
    for (int v : index) require_shape(v >= 0 && v < entries, "bias_from_table: index out of range");
    Tensor<T> out = Tensor<T>::alloc(Shape{heads, tokens, tokens});
    const T* tv = table.data();
    T* ov = out.mutable_data();
    const int n2 = tokens * tokens;
    for (int h = 0; h < heads; ++h) {
        const T* trow = tv + static_cast<int64_t>(h) * entries;
        T* orow = ov + static_cast<int64_t>(h) * n2;
        for (int i = 0; i < n2; ++i) orow[i] = trow[index[static_cast<size_t>(i)]];
    }

    if (!table.tracked()) return out;
    Tape<T>* tape = table.tape();
    const int pt = table.node();
    const int64_t tn = table.size();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gt(static_cast<size_t>(tn), T(0));
            for (int h = 0; h < heads; ++h) {
                const T* grow = g.data() + static_cast<int64_t>(h) * n2;
                T* trow = gt.data() + static_cast<int64_t>(h) * entries;
                for (int i = 0; i < n2; ++i) trow[index[static_cast<size_t>(i)]] += grow[i];
            }
            tp.accumulate(pt, gt);
        });
    out.bind(tape, node);
    return out;
}

// Relative-position index map for a square window: entry (i, j) encodes the
// offset between token i and token j in a (2w-1)^2 table.
inline std::vector<int> relative_position_index(int window) {
    const int n = window * window;
    const int span = 2 * window - 1;
    std::vector<int> idx(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        const int iy = i / window, ix = i % window;
        for (int j = 0; j < n; ++j) {
            const int jy = j / window, jx = j % window;
            const int dy = iy - jy + window - 1;
            const int dx = ix - jx + window - 1;
            idx[static_cast<size_t>(i) * n + j] = dy * span + dx;
        }
    }
    return idx;
}

// Additive attention mask for shifted windows on an (H, W) grid: token pairs
// that wrapped around from different image regions get a large negative
// logit. Returns one (tokens, tokens) block per window, flattened to
// (windows, 1, tokens, tokens).
template <typename T>
Tensor<T> shifted_window_mask(int H, int W, int window, int shift) {
    const int nwh = H / window, nww = W / window;
    const int tokens = window * window;
    std::vector<int> zone(static_cast<size_t>(H) * W);
    const auto zone_of = [&](int v, int size) {
        if (v < size - window) return 0;
        if (v < size - shift) return 1;
        return 2;
    };
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            zone[static_cast<size_t>(y) * W + x] = 3 * zone_of(y, H) + zone_of(x, W);
        }
    }
    Tensor<T> mask = Tensor<T>::alloc(Shape{nwh * nww, 1, tokens, tokens});
    T* mv = mask.mutable_data();
    for (int wy = 0; wy < nwh; ++wy) {
        for (int wx = 0; wx < nww; ++wx) {
            std::vector<int> z(static_cast<size_t>(tokens));
            for (int ty = 0; ty < window; ++ty) {
                for (int tx = 0; tx < window; ++tx) {
                    z[static_cast<size_t>(ty) * window + tx] =
                        zone[static_cast<size_t>(wy * window + ty) * W + wx * window + tx];
                }
            }
            T* block = mv + (static_cast<int64_t>(wy) * nww + wx) *
                                static_cast<int64_t>(tokens) * tokens;
            for (int i = 0; i < tokens; ++i) {
                for (int j = 0; j < tokens; ++j) {
                    block[static_cast<int64_t>(i) * tokens + j] =
                        (z[static_cast<size_t>(i)] == z[static_cast<size_t>(j)]) ? T(0)
                                                                                 : T(-100);
                }
            }
        }
    }
    return mask;
}

// Multi-head scaled dot-product attention over token sequences (B, L, D).
// The optional additive bias must broadcast to (B, heads, L, L); it carries
// both the learned relative-position term and any shift mask.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads,
                    const std::optional<Tensor<T>>& bias = std::nullopt) {
    require_shape(q.rank() == 3 && k.rank() == 3 && v.rank() == 3,
                  "attention: inputs must be (batch, tokens, dim)");
    require_shape(q.shape() == k.shape() && q.shape() == v.shape(),
                  "attention: q/k/v shapes must match");
    const int B = q.dim(0), L = q.dim(1), D = q.dim(2);
    require(heads >= 1, "attention: heads must be >= 1");
    require_shape(D % heads == 0, "attention: token dim " + std::to_string(D) +
                                      " not divisible by heads " + std::to_string(heads));
    const int hd = D / heads;

    const auto split = [&](const Tensor<T>& t) {
        return transpose(reshape(t, Shape{B, L, heads, hd}), {0, 2, 1, 3});
    };
    Tensor<T> qh = split(q);                                       // (B, h, L, hd)
    Tensor<T> kt = transpose(reshape(k, Shape{B, L, heads, hd}), {0, 2, 3, 1});  // (B,h,hd,L)
    Tensor<T> vh = split(v);
    Tensor<T> scores = mul_scalar(matmul(qh, kt), T(1) / std::sqrt(static_cast<T>(hd)));
    if (bias) {
        Tensor<T> b = *bias;
        if (b.shape() != scores.shape()) b = broadcast_to(b, scores.shape());
        scores = add(scores, b);
    }
    Tensor<T> attn = softmax(scores);
    Tensor<T> ctx = matmul(attn, vh);  // (B, h, L, hd)
    return reshape(transpose(ctx, {0, 2, 1, 3}), Shape{B, L, D});
}

}  // namespace sodboost
