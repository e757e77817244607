#pragma once

#include <optional>
#include <vector>

#include "sodboost/gemm.hpp"
#include "sodboost/ops.hpp"
#include "sodboost/tensor.hpp"

namespace sodboost {

namespace detail {

struct ConvGeom {
    int batch, in_ch, in_h, in_w;
    int out_ch, kh, kw;
    int stride, pad, dilation;
    int out_h, out_w;
    int64_t cols_rows() const { return static_cast<int64_t>(in_ch) * kh * kw; }
    int64_t cols_cols() const { return static_cast<int64_t>(out_h) * out_w; }
    bool is_pointwise() const {
        return kh == 1 && kw == 1 && stride == 1 && pad == 0 && dilation == 1;
    }
};

inline ConvGeom conv_geometry(const Shape& x, const Shape& w, int stride, int pad,
                              int dilation) {
    require_shape(x.size() == 4, "conv2d: input must be NCHW, got " + shape_str(x));
    require_shape(w.size() == 4, "conv2d: kernel must be (out,in,kh,kw), got " + shape_str(w));
    require(stride >= 1, "conv2d: stride must be >= 1");
    require(dilation >= 1, "conv2d: dilation must be >= 1");
    require(pad >= 0, "conv2d: pad must be >= 0");
    ConvGeom g;
    g.batch = x[0];
    g.in_ch = x[1];
    g.in_h = x[2];
    g.in_w = x[3];
    g.out_ch = w[0];
    g.kh = w[2];
    g.kw = w[3];
    g.stride = stride;
    g.pad = pad;
    g.dilation = dilation;
    require_shape(w[1] == g.in_ch, "conv2d: channel mismatch, input has " +
                                       std::to_string(g.in_ch) + " channels but kernel expects " +
                                       std::to_string(w[1]));
    g.out_h = (g.in_h + 2 * pad - dilation * (g.kh - 1) - 1) / stride + 1;
    g.out_w = (g.in_w + 2 * pad - dilation * (g.kw - 1) - 1) / stride + 1;
    require_shape(g.in_h + 2 * pad >= dilation * (g.kh - 1) + 1 &&
                      g.in_w + 2 * pad >= dilation * (g.kw - 1) + 1 && g.out_h >= 1 &&
                      g.out_w >= 1,
                  "conv2d: output size < 1 for input " + shape_str(x) + " kernel " +
                      shape_str(w));
    return g;
}

// Unrolls one image into the (in_ch*kh*kw, out_h*out_w) patch matrix.
template <typename T>
void im2col(const T* x, const ConvGeom& g, T* cols) {
    const int64_t ohw = g.cols_cols();
    parallel_for(g.cols_rows(), [&](int64_t row) {
        const int kx = static_cast<int>(row % g.kw);
        const int ky = static_cast<int>((row / g.kw) % g.kh);
        const int ic = static_cast<int>(row / (static_cast<int64_t>(g.kw) * g.kh));
        const T* plane = x + static_cast<int64_t>(ic) * g.in_h * g.in_w;
        T* dst = cols + row * ohw;
        for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride - g.pad + ky * g.dilation;
            if (iy < 0 || iy >= g.in_h) {
                for (int ox = 0; ox < g.out_w; ++ox) *dst++ = T(0);
                continue;
            }
            const T* src = plane + static_cast<int64_t>(iy) * g.in_w;
            for (int ox = 0; ox < g.out_w; ++ox) {
                const int ix = ox * g.stride - g.pad + kx * g.dilation;
                *dst++ = (ix >= 0 && ix < g.in_w) ? src[ix] : T(0);
            }
        }
    });
}

// Scatters patch-matrix gradients back onto the input plane. Runs serially:
// overlapping patches write to shared cells.
template <typename T>
void col2im(const T* cols, const ConvGeom& g, T* dx) {
    const int64_t ohw = g.cols_cols();
    const int64_t rows = g.cols_rows();
    for (int64_t row = 0; row < rows; ++row) {
        const int kx = static_cast<int>(row % g.kw);
        const int ky = static_cast<int>((row / g.kw) % g.kh);
        const int ic = static_cast<int>(row / (static_cast<int64_t>(g.kw) * g.kh));
        T* plane = dx + static_cast<int64_t>(ic) * g.in_h * g.in_w;
        const T* src = cols + row * ohw;
        for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride - g.pad + ky * g.dilation;
            if (iy < 0 || iy >= g.in_h) {
                src += g.out_w;
                continue;
            }
            T* drow = plane + static_cast<int64_t>(iy) * g.in_w;
            for (int ox = 0; ox < g.out_w; ++ox) {
                const int ix = ox * g.stride - g.pad + kx * g.dilation;
                if (ix >= 0 && ix < g.in_w) drow[ix] += src[ox];
            }
            src += g.out_w;
        }
    }
}

}  // namespace detail

// 2-D convolution over NCHW input with zero padding, stride and dilation.
// Gradients are defined for the input, the kernel and the bias.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const std::optional<Tensor<T>>& bias, int stride = 1, int pad = 0,
                 int dilation = 1) {
    const detail::ConvGeom g = detail::conv_geometry(x.shape(), weight.shape(), stride, pad,
                                                     dilation);
    if (bias) {
        require_shape(bias->rank() == 1 && bias->dim(0) == g.out_ch,
                      "conv2d: bias shape must be (" + std::to_string(g.out_ch) + ")");
    }

    const int64_t K = g.cols_rows();
    const int64_t ohw = g.cols_cols();
    const int64_t in_plane = static_cast<int64_t>(g.in_ch) * g.in_h * g.in_w;
    const int64_t out_plane = static_cast<int64_t>(g.out_ch) * ohw;

    Tensor<T> out = Tensor<T>::alloc(Shape{g.batch, g.out_ch, g.out_h, g.out_w});
    const T* xv = x.data();
    const T* wv = weight.data();
    T* ov = out.mutable_data();

    std::vector<T> cols;
    const bool pointwise = g.is_pointwise();
    if (!pointwise) cols.resize(static_cast<size_t>(K * ohw));
    for (int n = 0; n < g.batch; ++n) {
        const T* xin = xv + n * in_plane;
        const T* colptr = xin;
        if (!pointwise) {
            detail::im2col(xin, g, cols.data());
            colptr = cols.data();
        }
        gemm_nn(wv, colptr, ov + n * out_plane, g.out_ch, static_cast<int>(K),
                static_cast<int>(ohw), false);
    }
    if (bias) {
        const T* bv = bias->data();
        for (int n = 0; n < g.batch; ++n) {
            for (int oc = 0; oc < g.out_ch; ++oc) {
                T* dst = ov + n * out_plane + oc * ohw;
                const T b = bv[oc];
                for (int64_t i = 0; i < ohw; ++i) dst[i] += b;
            }
        }
    }

    const Tensor<T>* bptr = bias ? &*bias : nullptr;
    Tape<T>* tape = bptr ? detail::merge_tapes<T>({&x, &weight, bptr})
                         : detail::merge_tapes<T>({&x, &weight});
    if (!tape) return out;

    const int px = x.tracked() ? x.node() : -1;
    const int pw = weight.tracked() ? weight.node() : -1;
    const int pb = (bptr && bptr->tracked()) ? bptr->node() : -1;
    Tensor<T> xd = x.detach(), wd = weight.detach();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& gout) {
            const T* xv = xd.data();
            const T* wv = wd.data();
            std::vector<T> cols;
            if (!pointwise) cols.resize(static_cast<size_t>(K * ohw));
            if (pw >= 0) {
                std::vector<T> gw(static_cast<size_t>(wd.size()), T(0));
                for (int n = 0; n < g.batch; ++n) {
                    const T* colptr = xv + n * in_plane;
                    if (!pointwise) {
                        detail::im2col(colptr, g, cols.data());
                        colptr = cols.data();
                    }
                    gemm_nt(gout.data() + n * out_plane, colptr, gw.data(), g.out_ch,
                            static_cast<int>(ohw), static_cast<int>(K), true);
                }
                tp.accumulate(pw, gw);
            }
            if (px >= 0) {
                std::vector<T> gx(static_cast<size_t>(xd.size()), T(0));
                std::vector<T> dcols(pointwise ? 0 : static_cast<size_t>(K * ohw));
                for (int n = 0; n < g.batch; ++n) {
                    if (pointwise) {
                        gemm_tn(wv, gout.data() + n * out_plane, gx.data() + n * in_plane,
                                static_cast<int>(K), g.out_ch, static_cast<int>(ohw), false);
                    } else {
                        gemm_tn(wv, gout.data() + n * out_plane, dcols.data(),
                                static_cast<int>(K), g.out_ch, static_cast<int>(ohw), false);
                        detail::col2im(dcols.data(), g, gx.data() + n * in_plane);
                    }
                }
                tp.accumulate(px, gx);
            }
            if (pb >= 0) {
                std::vector<T> gb(static_cast<size_t>(g.out_ch), T(0));
                for (int n = 0; n < g.batch; ++n) {
                    for (int oc = 0; oc < g.out_ch; ++oc) {
                        const T* src = gout.data() + n * out_plane + oc * ohw;
                        T acc = T(0);
                        for (int64_t i = 0; i < ohw; ++i) acc += src[i];
                        gb[static_cast<size_t>(oc)] += acc;
                    }
                }
                tp.accumulate(pb, gb);
            }
        });
    out.bind(tape, node);
    return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, int stride = 1, int pad = 0,
                 int dilation = 1) {
    return conv2d(x, weight, std::optional<Tensor<T>>{}, stride, pad, dilation);
}

}  // namespace sodboost
