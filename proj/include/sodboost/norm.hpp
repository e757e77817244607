#pragma once

#include <cmath>
#include <vector>

#include "sodboost/parallel.hpp"
#include "sodboost/tensor.hpp"

namespace sodboost {

// Batch normalization over (batch, height, width) per channel. Training mode
// normalizes with batch statistics and folds them into the running buffers
// with momentum 0.1 (running variance uses the unbiased estimate); eval mode
// normalizes with the running statistics captured here.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      std::vector<T>& running_mean, std::vector<T>& running_var,
                      bool training, T momentum = T(0.1), T eps = T(1e-5)) {
    require_shape(x.rank() == 4, "batchnorm2d: input must be NCHW, got " + shape_str(x.shape()));
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require_shape(gamma.rank() == 1 && gamma.dim(0) == C && beta.rank() == 1 &&
                      beta.dim(0) == C,
                  "batchnorm2d: affine parameters must have shape (" + std::to_string(C) + ")");
    require_shape(static_cast<int>(running_mean.size()) == C &&
                      static_cast<int>(running_var.size()) == C,
                  "batchnorm2d: running statistic size mismatch");
    const int64_t plane = static_cast<int64_t>(H) * W;
    const int64_t m = static_cast<int64_t>(N) * plane;
    require_shape(m > 0, "batchnorm2d: zero-size reduction axis");

    std::vector<T> mu(C), invstd(C);
    if (training) {
        parallel_for(C, [&](int64_t c) {
            T s = T(0);
            for (int n = 0; n < N; ++n) {
                const T* src = x.data() + ((static_cast<int64_t>(n) * C + c) * plane);
                for (int64_t i = 0; i < plane; ++i) s += src[i];
            }
            const T mean_c = s / static_cast<T>(m);
            T v = T(0);
            for (int n = 0; n < N; ++n) {
                const T* src = x.data() + ((static_cast<int64_t>(n) * C + c) * plane);
                for (int64_t i = 0; i < plane; ++i) {
                    const T d = src[i] - mean_c;
                    v += d * d;
                }
            }
            const T var_c = v / static_cast<T>(m);
            mu[c] = mean_c;
            invstd[c] = T(1) / std::sqrt(var_c + eps);
            running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean_c;
            const T var_unbiased = m > 1 ? v / static_cast<T>(m - 1) : var_c;
            running_var[c] = (T(1) - momentum) * running_var[c] + momentum * var_unbiased;
        });
    } else {
        for (int c = 0; c < C; ++c) {
            mu[c] = running_mean[c];
            invstd[c] = T(1) / std::sqrt(running_var[c] + eps);
        }
    }

    Tensor<T> out = Tensor<T>::alloc(x.shape());
    {
        const T* xv = x.data();
        const T* gv = gamma.data();
        const T* bv = beta.data();
        T* ov = out.mutable_data();
        parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
            const int c = static_cast<int>(nc % C);
            const T scale = gv[c] * invstd[c];
            const T shift = bv[c] - mu[c] * scale;
            const T* src = xv + nc * plane;
            T* dst = ov + nc * plane;
            for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] * scale + shift;
        });
    }

    Tape<T>* tape = detail::merge_tapes<T>({&x, &gamma, &beta});
    if (!tape) return out;
    const int px = x.tracked() ? x.node() : -1;
    const int pg = gamma.tracked() ? gamma.node() : -1;
    const int pb = beta.tracked() ? beta.node() : -1;
    Tensor<T> xd = x.detach(), gd = gamma.detach();
    const int node = tape->add_node(
        out.size(),
        [=, mu = std::move(mu), invstd = std::move(invstd)](Tape<T>& tp,
                                                            const std::vector<T>& g) {
            const T* xv = xd.data();
            const T* gv = gd.data();
            std::vector<T> dgamma(C, T(0)), dbeta(C, T(0));
            // Per-channel reductions of g and g*xhat, needed for every output.
            for (int c = 0; c < C; ++c) {
                T sg = T(0), sgx = T(0);
                for (int n = 0; n < N; ++n) {
                    const int64_t base = (static_cast<int64_t>(n) * C + c) * plane;
                    for (int64_t i = 0; i < plane; ++i) {
                        const T gi = g[static_cast<size_t>(base + i)];
                        sg += gi;
                        sgx += gi * (xv[base + i] - mu[c]) * invstd[c];
                    }
                }
                dbeta[c] = sg;
                dgamma[c] = sgx;
            }
            if (px >= 0) {
                std::vector<T> gx(g.size());
                if (training) {
                    parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
                        const int c = static_cast<int>(nc % C);
                        const T ginv = gv[c] * invstd[c];
                        const T mg = dbeta[c] / static_cast<T>(m);
                        const T mgx = dgamma[c] / static_cast<T>(m);
                        const int64_t base = nc * plane;
                        for (int64_t i = 0; i < plane; ++i) {
                            const T xh = (xv[base + i] - mu[c]) * invstd[c];
                            gx[static_cast<size_t>(base + i)] =
                                ginv * (g[static_cast<size_t>(base + i)] - mg - xh * mgx);
                        }
                    });
                } else {
                    parallel_for(static_cast<int64_t>(N) * C, [&](int64_t nc) {
                        const int c = static_cast<int>(nc % C);
                        const T ginv = gv[c] * invstd[c];
                        const int64_t base = nc * plane;
                        for (int64_t i = 0; i < plane; ++i) {
                            gx[static_cast<size_t>(base + i)] =
                                ginv * g[static_cast<size_t>(base + i)];
                        }
                    });
                }
                tp.accumulate(px, gx);
            }
            if (pg >= 0) tp.accumulate(pg, dgamma);
            if (pb >= 0) tp.accumulate(pb, dbeta);
        });
    out.bind(tape, node);
    return out;
}

// Layer normalization over the last (feature) axis of token tensors.
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    T eps = T(1e-5)) {
    require_shape(x.rank() >= 1, "layernorm: rank must be >= 1");
    const int C = x.dim(-1);
    require_shape(C > 0, "layernorm: zero-size reduction axis");
    require_shape(gamma.rank() == 1 && gamma.dim(0) == C && beta.rank() == 1 &&
                      beta.dim(0) == C,
                  "layernorm: affine parameters must have shape (" + std::to_string(C) + ")");
    const int64_t rows = x.size() / C;

    Tensor<T> out = Tensor<T>::alloc(x.shape());
    std::vector<T> mu(static_cast<size_t>(rows)), invstd(static_cast<size_t>(rows));
    {
        const T* xv = x.data();
        const T* gv = gamma.data();
        const T* bv = beta.data();
        T* ov = out.mutable_data();
        parallel_for(rows, [&](int64_t r) {
            const T* src = xv + r * C;
            T s = T(0);
            for (int j = 0; j < C; ++j) s += src[j];
            const T mean_r = s / static_cast<T>(C);
            T v = T(0);
            for (int j = 0; j < C; ++j) {
                const T d = src[j] - mean_r;
                v += d * d;
            }
            const T is = T(1) / std::sqrt(v / static_cast<T>(C) + eps);
            mu[static_cast<size_t>(r)] = mean_r;
            invstd[static_cast<size_t>(r)] = is;
            T* dst = ov + r * C;
            for (int j = 0; j < C; ++j) dst[j] = (src[j] - mean_r) * is * gv[j] + bv[j];
        });
    }

    Tape<T>* tape = detail::merge_tapes<T>({&x, &gamma, &beta});
    if (!tape) return out;
    const int px = x.tracked() ? x.node() : -1;
    const int pg = gamma.tracked() ? gamma.node() : -1;
    const int pb = beta.tracked() ? beta.node() : -1;
    Tensor<T> xd = x.detach(), gd = gamma.detach();
    const int node = tape->add_node(
        out.size(),
        [=, mu = std::move(mu), invstd = std::move(invstd)](Tape<T>& tp,
                                                            const std::vector<T>& g) {
            const T* xv = xd.data();
            const T* gv = gd.data();
            std::vector<T> gx(px >= 0 ? g.size() : 0);
            std::vector<T> dgamma(C, T(0)), dbeta(C, T(0));
            for (int64_t r = 0; r < rows; ++r) {
                const T* src = xv + r * C;
                const T* gr = g.data() + r * C;
                const T is = invstd[static_cast<size_t>(r)];
                const T m_r = mu[static_cast<size_t>(r)];
                T sdxh = T(0), sdxh_xh = T(0);
                for (int j = 0; j < C; ++j) {
                    const T xh = (src[j] - m_r) * is;
                    const T dxh = gr[j] * gv[j];
                    sdxh += dxh;
                    sdxh_xh += dxh * xh;
                    dgamma[j] += gr[j] * xh;
                    dbeta[j] += gr[j];
                }
                if (px >= 0) {
                    T* gxr = gx.data() + r * C;
                    const T mdxh = sdxh / static_cast<T>(C);
                    const T mdxh_xh = sdxh_xh / static_cast<T>(C);
                    for (int j = 0; j < C; ++j) {
                        const T xh = (src[j] - m_r) * is;
                        gxr[j] = is * (gr[j] * gv[j] - mdxh - xh * mdxh_xh);
                    }
                }
            }
            if (px >= 0) tp.accumulate(px, gx);
            if (pg >= 0) tp.accumulate(pg, dgamma);
            if (pb >= 0) tp.accumulate(pb, dbeta);
        });
    out.bind(tape, node);
    return out;
}

}  // namespace sodboost
