#pragma once

#include <cmath>
#include <vector>

#include "sodboost/parallel.hpp"
#include "sodboost/tensor.hpp"

namespace sodboost {

namespace detail {

// Half-pixel-center sampling grid for one axis (align-corners false).
struct AxisMap {
    std::vector<int> lo, hi;
    std::vector<double> frac;
};

inline AxisMap make_axis_map(int in_size, int out_size) {
    AxisMap m;
    m.lo.resize(out_size);
    m.hi.resize(out_size);
    m.frac.resize(out_size);
    const double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        if (src > in_size - 1.0) src = in_size - 1.0;
        const int lo = static_cast<int>(std::floor(src));
        m.lo[o] = lo;
        m.hi[o] = std::min(lo + 1, in_size - 1);
        m.frac[o] = src - lo;
    }
    return m;
}

}  // namespace detail

// Bilinear resize of an NCHW tensor to an arbitrary spatial size using
// half-pixel centers. Serves both upsampling between pyramid levels and the
// fixed-size downsampling in front of the semantic branch.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int out_h, int out_w) {
    require_shape(x.rank() == 4, "bilinear_resize: input must be NCHW, got " +
                                     shape_str(x.shape()));
    require(out_h >= 1 && out_w >= 1, "bilinear_resize: target size must be >= 1");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const detail::AxisMap ym = detail::make_axis_map(H, out_h);
    const detail::AxisMap xm = detail::make_axis_map(W, out_w);

    Tensor<T> out = Tensor<T>::alloc(Shape{N, C, out_h, out_w});
    const T* xv = x.data();
    T* ov = out.mutable_data();
    const int64_t in_plane = static_cast<int64_t>(H) * W;
    const int64_t out_plane = static_cast<int64_t>(out_h) * out_w;
    parallel_for(static_cast<int64_t>(N) * C, [&](int64_t p) {
        const T* src = xv + p * in_plane;
        T* dst = ov + p * out_plane;
        for (int oy = 0; oy < out_h; ++oy) {
            const int y0 = ym.lo[oy], y1 = ym.hi[oy];
            const T fy = static_cast<T>(ym.frac[oy]);
            const T* r0 = src + static_cast<int64_t>(y0) * W;
            const T* r1 = src + static_cast<int64_t>(y1) * W;
            for (int ox = 0; ox < out_w; ++ox) {
                const int x0 = xm.lo[ox], x1 = xm.hi[ox];
                const T fx = static_cast<T>(xm.frac[ox]);
                const T top = r0[x0] + fx * (r0[x1] - r0[x0]);
                const T bot = r1[x0] + fx * (r1[x1] - r1[x0]);
                *dst++ = top + fy * (bot - top);
            }
        }
    });

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int64_t xn = x.size();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gx(static_cast<size_t>(xn), T(0));
            parallel_for(static_cast<int64_t>(N) * C, [&](int64_t p) {
                T* dst = gx.data() + p * in_plane;
                const T* src = g.data() + p * out_plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int y0 = ym.lo[oy], y1 = ym.hi[oy];
                    const T fy = static_cast<T>(ym.frac[oy]);
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int x0 = xm.lo[ox], x1 = xm.hi[ox];
                        const T fx = static_cast<T>(xm.frac[ox]);
                        const T gv = src[static_cast<int64_t>(oy) * out_w + ox];
                        dst[static_cast<int64_t>(y0) * W + x0] += gv * (1 - fy) * (1 - fx);
                        dst[static_cast<int64_t>(y0) * W + x1] += gv * (1 - fy) * fx;
                        dst[static_cast<int64_t>(y1) * W + x0] += gv * fy * (1 - fx);
                        dst[static_cast<int64_t>(y1) * W + x1] += gv * fy * fx;
                    }
                }
            });
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

// Integer-factor upsampling.
template <typename T>
Tensor<T> bilinear_up(const Tensor<T>& x, int factor) {
    require(factor >= 1, "bilinear_up: factor must be >= 1");
    if (factor == 1) return x;
    return bilinear_resize(x, x.dim(2) * factor, x.dim(3) * factor);
}

// Replicates the bottom row / right column outward. Used to make odd spatial
// sizes divisible before pooling and window partitioning.
template <typename T>
Tensor<T> pad_edge2d(const Tensor<T>& x, int pad_bottom, int pad_right) {
    require_shape(x.rank() == 4, "pad_edge2d: input must be NCHW");
    require(pad_bottom >= 0 && pad_right >= 0, "pad_edge2d: negative padding");
    if (pad_bottom == 0 && pad_right == 0) return x;
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int OH = H + pad_bottom, OW = W + pad_right;
    Tensor<T> out = Tensor<T>::alloc(Shape{N, C, OH, OW});
    const T* xv = x.data();
    T* ov = out.mutable_data();
    const int64_t in_plane = static_cast<int64_t>(H) * W;
    const int64_t out_plane = static_cast<int64_t>(OH) * OW;
    parallel_for(static_cast<int64_t>(N) * C, [&](int64_t p) {
        const T* src = xv + p * in_plane;
        T* dst = ov + p * out_plane;
        for (int oy = 0; oy < OH; ++oy) {
            const int iy = std::min(oy, H - 1);
            const T* srow = src + static_cast<int64_t>(iy) * W;
            T* drow = dst + static_cast<int64_t>(oy) * OW;
            for (int ox = 0; ox < OW; ++ox) drow[ox] = srow[std::min(ox, W - 1)];
        }
    });

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int64_t xn = x.size();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gx(static_cast<size_t>(xn), T(0));
            parallel_for(static_cast<int64_t>(N) * C, [&](int64_t p) {
                T* dst = gx.data() + p * in_plane;
                const T* src = g.data() + p * out_plane;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = std::min(oy, H - 1);
                    T* drow = dst + static_cast<int64_t>(iy) * W;
                    const T* srow = src + static_cast<int64_t>(oy) * OW;
                    for (int ox = 0; ox < OW; ++ox) drow[std::min(ox, W - 1)] += srow[ox];
                }
            });
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

// Keeps the top-left (out_h, out_w) region; the gradient zero-pads back.
template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, int out_h, int out_w) {
    require_shape(x.rank() == 4, "crop2d: input must be NCHW");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require_shape(out_h <= H && out_w <= W && out_h >= 1 && out_w >= 1,
                  "crop2d: crop larger than input");
    if (out_h == H && out_w == W) return x;
    Tensor<T> out = Tensor<T>::alloc(Shape{N, C, out_h, out_w});
    const T* xv = x.data();
    T* ov = out.mutable_data();
    const int64_t in_plane = static_cast<int64_t>(H) * W;
    const int64_t out_plane = static_cast<int64_t>(out_h) * out_w;
    parallel_for(static_cast<int64_t>(N) * C, [&](int64_t p) {
        for (int oy = 0; oy < out_h; ++oy) {
            const T* srow = xv + p * in_plane + static_cast<int64_t>(oy) * W;
            T* drow = ov + p * out_plane + static_cast<int64_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) drow[ox] = srow[ox];
        }
    });

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int64_t xn = x.size();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gx(static_cast<size_t>(xn), T(0));
            parallel_for(static_cast<int64_t>(N) * C, [&](int64_t p) {
                for (int oy = 0; oy < out_h; ++oy) {
                    T* drow = gx.data() + p * in_plane + static_cast<int64_t>(oy) * W;
                    const T* srow = g.data() + p * out_plane + static_cast<int64_t>(oy) * out_w;
                    for (int ox = 0; ox < out_w; ++ox) drow[ox] += srow[ox];
                }
            });
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

namespace detail {

template <typename T>
Tensor<T> pool_to_multiple(const Tensor<T>& x, int window) {
    const int H = x.dim(2), W = x.dim(3);
    const int pb = (window - H % window) % window;
    const int pr = (window - W % window) % window;
    return pad_edge2d(x, pb, pr);
}

}  // namespace detail

// Average pooling with a square window; inputs whose spatial size is not a
// multiple of the window are edge-padded on the bottom/right first.
template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x_in, int window) {
    require(window >= 1, "avg_pool: window must be >= 1");
    Tensor<T> x = detail::pool_to_multiple(x_in, window);
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int OH = H / window, OW = W / window;
    Tensor<T> out = Tensor<T>::alloc(Shape{N, C, OH, OW});
    const T* xv = x.data();
    T* ov = out.mutable_data();
    const int64_t in_plane = static_cast<int64_t>(H) * W;
    const int64_t out_plane = static_cast<int64_t>(OH) * OW;
    const T inv = T(1) / static_cast<T>(window * window);
    parallel_for(static_cast<int64_t>(N) * C, [&](int64_t p) {
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                T acc = T(0);
                for (int ky = 0; ky < window; ++ky) {
                    const T* row = xv + p * in_plane +
                                   static_cast<int64_t>(oy * window + ky) * W + ox * window;
                    for (int kx = 0; kx < window; ++kx) acc += row[kx];
                }
                ov[p * out_plane + static_cast<int64_t>(oy) * OW + ox] = acc * inv;
            }
        }
    });

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int64_t xn = x.size();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gx(static_cast<size_t>(xn), T(0));
            parallel_for(static_cast<int64_t>(N) * C, [&](int64_t p) {
                for (int oy = 0; oy < OH; ++oy) {
                    for (int ox = 0; ox < OW; ++ox) {
                        const T gv = g[static_cast<size_t>(p * out_plane +
                                                           static_cast<int64_t>(oy) * OW + ox)] *
                                     inv;
                        for (int ky = 0; ky < window; ++ky) {
                            T* row = gx.data() + p * in_plane +
                                     static_cast<int64_t>(oy * window + ky) * W + ox * window;
                            for (int kx = 0; kx < window; ++kx) row[kx] += gv;
                        }
                    }
                }
            });
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

// Max pooling; gradient routes to the first maximum in scan order.
template <typename T>
Tensor<T> max_pool(const Tensor<T>& x_in, int window) {
    require(window >= 1, "max_pool: window must be >= 1");
    Tensor<T> x = detail::pool_to_multiple(x_in, window);
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int OH = H / window, OW = W / window;
    Tensor<T> out = Tensor<T>::alloc(Shape{N, C, OH, OW});
    auto argmax = std::make_shared<std::vector<int32_t>>(out.size());
    const T* xv = x.data();
    T* ov = out.mutable_data();
    const int64_t in_plane = static_cast<int64_t>(H) * W;
    const int64_t out_plane = static_cast<int64_t>(OH) * OW;
    parallel_for(static_cast<int64_t>(N) * C, [&](int64_t p) {
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                T best = -std::numeric_limits<T>::infinity();
                int32_t best_idx = 0;
                for (int ky = 0; ky < window; ++ky) {
                    const int iy = oy * window + ky;
                    for (int kx = 0; kx < window; ++kx) {
                        const int ix = ox * window + kx;
                        const T v = xv[p * in_plane + static_cast<int64_t>(iy) * W + ix];
                        if (v > best) {
                            best = v;
                            best_idx = static_cast<int32_t>(iy * W + ix);
                        }
                    }
                }
                const int64_t oidx = p * out_plane + static_cast<int64_t>(oy) * OW + ox;
                ov[oidx] = best;
                (*argmax)[static_cast<size_t>(oidx)] = best_idx;
            }
        }
    });

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int64_t xn = x.size();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gx(static_cast<size_t>(xn), T(0));
            for (int64_t p = 0; p < static_cast<int64_t>(N) * C; ++p) {
                for (int64_t i = 0; i < out_plane; ++i) {
                    const int64_t oidx = p * out_plane + i;
                    gx[static_cast<size_t>(p * in_plane + (*argmax)[static_cast<size_t>(oidx)])] +=
                        g[static_cast<size_t>(oidx)];
                }
            }
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

// Spatial mean per channel: (N,C,H,W) -> (N,C,1,1).
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    require_shape(x.rank() == 4, "global_avg_pool: input must be NCHW");
    const int N = x.dim(0), C = x.dim(1);
    const int64_t plane = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    require_shape(plane > 0, "global_avg_pool: empty spatial extent");
    Tensor<T> out = Tensor<T>::alloc(Shape{N, C, 1, 1});
    const T* xv = x.data();
    T* ov = out.mutable_data();
    const T inv = T(1) / static_cast<T>(plane);
    for (int64_t p = 0; p < static_cast<int64_t>(N) * C; ++p) {
        T acc = T(0);
        const T* src = xv + p * plane;
        for (int64_t i = 0; i < plane; ++i) acc += src[i];
        ov[p] = acc * inv;
    }

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int64_t xn = x.size();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gx(static_cast<size_t>(xn));
            for (int64_t p = 0; p < static_cast<int64_t>(N) * C; ++p) {
                const T gv = g[static_cast<size_t>(p)] * inv;
                T* dst = gx.data() + p * plane;
                for (int64_t i = 0; i < plane; ++i) dst[i] = gv;
            }
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

// Cyclic shift along height/width (positive shifts move content down/right).
template <typename T>
Tensor<T> roll2d(const Tensor<T>& x, int shift_y, int shift_x) {
    require_shape(x.rank() == 4, "roll2d: input must be NCHW");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto wrap = [](int v, int m) { return ((v % m) + m) % m; };
    const int sy = wrap(shift_y, H), sx = wrap(shift_x, W);
    if (sy == 0 && sx == 0) return x;
    Tensor<T> out = Tensor<T>::alloc(x.shape());
    const T* xv = x.data();
    T* ov = out.mutable_data();
    const int64_t plane = static_cast<int64_t>(H) * W;
    parallel_for(static_cast<int64_t>(N) * C, [&](int64_t p) {
        const T* src = xv + p * plane;
        T* dst = ov + p * plane;
        for (int oy = 0; oy < H; ++oy) {
            const int iy = wrap(oy - sy, H);
            for (int ox = 0; ox < W; ++ox) {
                dst[static_cast<int64_t>(oy) * W + ox] =
                    src[static_cast<int64_t>(iy) * W + wrap(ox - sx, W)];
            }
        }
    });

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gx(g.size());
            parallel_for(static_cast<int64_t>(N) * C, [&](int64_t p) {
                const T* src = g.data() + p * plane;
                T* dst = gx.data() + p * plane;
                for (int iy = 0; iy < H; ++iy) {
                    const int oy = wrap(iy + sy, H);
                    for (int ix = 0; ix < W; ++ix) {
                        dst[static_cast<int64_t>(iy) * W + ix] =
                            src[static_cast<int64_t>(oy) * W + wrap(ix + sx, W)];
                    }
                }
            });
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

}  // namespace sodboost
