#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include "sodboost/gemm.hpp"
#include "sodboost/parallel.hpp"
#include "sodboost/tensor.hpp"

namespace sodboost {

namespace detail {

constexpr int kMaxRank = 8;

// Right-aligned numpy-style broadcast plan. A dimension may differ between
// the operands only if one side is 1; that side gets element stride 0.
struct BcastPlan {
    Shape out;
    int rank = 0;
    int64_t out_size = 1;
    std::array<int64_t, kMaxRank> odims{};
    std::array<int64_t, kMaxRank> astride{};
    std::array<int64_t, kMaxRank> bstride{};
};

inline BcastPlan make_bcast_plan(const Shape& a, const Shape& b, const char* op) {
    const int ra = static_cast<int>(a.size());
    const int rb = static_cast<int>(b.size());
    const int rank = std::max(ra, rb);
    require_shape(rank <= kMaxRank, std::string(op) + ": rank too large");
    BcastPlan p;
    p.rank = rank;
    p.out.resize(rank);
    std::array<int64_t, kMaxRank> adims{}, bdims{};
    for (int i = 0; i < rank; ++i) {
        const int ai = i - (rank - ra);
        const int bi = i - (rank - rb);
        const int64_t ad = ai >= 0 ? a[ai] : 1;
        const int64_t bd = bi >= 0 ? b[bi] : 1;
        if (ad != bd && ad != 1 && bd != 1) {
            throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                             shape_str(b) + " are not broadcast-compatible");
        }
        adims[i] = ad;
        bdims[i] = bd;
        p.odims[i] = std::max(ad, bd);
        p.out[i] = static_cast<int>(p.odims[i]);
        p.out_size *= p.odims[i];
    }
    int64_t sa = 1, sb = 1;
    for (int i = rank - 1; i >= 0; --i) {
        p.astride[i] = (adims[i] == 1 && p.odims[i] > 1) ? 0 : sa;
        p.bstride[i] = (bdims[i] == 1 && p.odims[i] > 1) ? 0 : sb;
        sa *= adims[i];
        sb *= bdims[i];
    }
    return p;
}

// Visits every output element with the matching operand offsets.
template <typename F>
void bcast_iterate(const BcastPlan& p, F&& f) {
    std::array<int64_t, kMaxRank> idx{};
    int64_t ai = 0, bi = 0;
    for (int64_t oi = 0; oi < p.out_size; ++oi) {
        f(oi, ai, bi);
        for (int d = p.rank - 1; d >= 0; --d) {
            ++idx[d];
            ai += p.astride[d];
            bi += p.bstride[d];
            if (idx[d] < p.odims[d]) break;
            ai -= p.astride[d] * p.odims[d];
            bi -= p.bstride[d] * p.odims[d];
            idx[d] = 0;
        }
    }
}

template <typename T, typename Fwd, typename Da, typename Db>
Tensor<T> binary_ew(const char* name, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd,
                    Da dfda, Db dfdb) {
    const bool same = a.shape() == b.shape();
    BcastPlan plan;
    Tensor<T> out;
    if (same) {
        out = Tensor<T>::alloc(a.shape());
        const T* av = a.data();
        const T* bv = b.data();
        T* ov = out.mutable_data();
        const int64_t n = a.size();
        for (int64_t i = 0; i < n; ++i) ov[i] = fwd(av[i], bv[i]);
    } else {
        plan = make_bcast_plan(a.shape(), b.shape(), name);
        out = Tensor<T>::alloc(plan.out);
        const T* av = a.data();
        const T* bv = b.data();
        T* ov = out.mutable_data();
        bcast_iterate(plan, [&](int64_t oi, int64_t ai, int64_t bi) {
            ov[oi] = fwd(av[ai], bv[bi]);
        });
    }

    Tape<T>* tape = merge_tapes<T>({&a, &b});
    if (!tape) return out;
    const int pa = a.tracked() ? a.node() : -1;
    const int pb = b.tracked() ? b.node() : -1;
    Tensor<T> ad = a.detach(), bd = b.detach();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            const T* av = ad.data();
            const T* bv = bd.data();
            if (pa >= 0) {
                std::vector<T> ga(static_cast<size_t>(ad.size()), T(0));
                if (same) {
                    for (size_t i = 0; i < ga.size(); ++i) ga[i] = g[i] * dfda(av[i], bv[i]);
                } else {
                    bcast_iterate(plan, [&](int64_t oi, int64_t ai, int64_t bi) {
                        ga[ai] += g[oi] * dfda(av[ai], bv[bi]);
                    });
                }
                tp.accumulate(pa, ga);
            }
            if (pb >= 0) {
                std::vector<T> gb(static_cast<size_t>(bd.size()), T(0));
                if (same) {
                    for (size_t i = 0; i < gb.size(); ++i) gb[i] = g[i] * dfdb(av[i], bv[i]);
                } else {
                    bcast_iterate(plan, [&](int64_t oi, int64_t ai, int64_t bi) {
                        gb[bi] += g[oi] * dfdb(av[ai], bv[bi]);
                    });
                }
                tp.accumulate(pb, gb);
            }
        });
    out.bind(tape, node);
    return out;
}

// dfdx receives (input value, output value) so activations can reuse the
// forward result.
template <typename T, typename Fwd, typename Dx>
Tensor<T> unary_ew(const Tensor<T>& x, Fwd fwd, Dx dfdx) {
    Tensor<T> out = Tensor<T>::alloc(x.shape());
    const T* xv = x.data();
    T* ov = out.mutable_data();
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) ov[i] = fwd(xv[i]);

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    Tensor<T> xd = x.detach(), od = out.detach();
    const int node = tape->add_node(n, [=](Tape<T>& tp, const std::vector<T>& g) {
        const T* xv = xd.data();
        const T* yv = od.data();
        std::vector<T> gx(g.size());
        for (size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * dfdx(xv[i], yv[i]);
        tp.accumulate(px, gx);
    });
    out.bind(tape, node);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic (broadcasting, gradient for all inputs)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_ew(
        "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
        [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_ew(
        "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
        [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_ew(
        "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
        [](T x, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_ew(
        "div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
        [](T x, T y) { return -x / (y * y); });
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T>
Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
    return detail::unary_ew(x, [](T v) { return -v; }, [](T, T) { return T(-1); });
}

// 1 - x, the pixelwise inversion used on predictions and masks.
template <typename T>
Tensor<T> one_minus(const Tensor<T>& x) {
    return detail::unary_ew(x, [](T v) { return T(1) - v; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
    return detail::unary_ew(x, [](T v) { return std::log(v); },
                            [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return detail::unary_ew(x, [](T v) { return v > T(0) ? v : T(0); },
                            [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return detail::unary_ew(
        x,
        [](T v) {
            if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
            const T e = std::exp(v);
            return e / (T(1) + e);
        },
        [](T, T y) { return y * (T(1) - y); });
}

// Gradient passes through inside [lo, hi] (inclusive) and is zero outside.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
    require(lo <= hi, "clamp: lo must not exceed hi");
    return detail::unary_ew(
        x, [lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); },
        [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
    return detail::unary_ew(x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T c) {
    return detail::unary_ew(x, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <typename T>
Tensor<T> operator*(T c, const Tensor<T>& x) { return mul_scalar(x, c); }

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

// Sum over all elements, fixed left-to-right order.
template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = T(0);
    const T* xv = x.data();
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) acc += xv[i];
    Tensor<T> out = Tensor<T>::from(Shape{}, {acc});

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int node = tape->add_node(1, [px, n](Tape<T>& tp, const std::vector<T>& g) {
        std::vector<T> gx(static_cast<size_t>(n), g[0]);
        tp.accumulate(px, gx);
    });
    out.bind(tape, node);
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    require_shape(x.size() > 0, "mean of an empty tensor");
    return mul_scalar(sum(x), T(1) / static_cast<T>(x.size()));
}

// ---------------------------------------------------------------------------
// Data movement
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    require_shape(numel(shape) == x.size(), "reshape: cannot view " + shape_str(x.shape()) +
                                                " as " + shape_str(shape));
    Tensor<T> out = Tensor<T>::alloc(shape);
    std::copy(x.values().begin(), x.values().end(), out.mutable_values().begin());

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int node = tape->add_node(x.size(), [px](Tape<T>& tp, const std::vector<T>& g) {
        tp.accumulate(px, g);
    });
    out.bind(tape, node);
    return out;
}

namespace detail {

template <typename T>
std::vector<T> permute_values(const T* src, const Shape& in_shape,
                              const std::vector<int>& perm, Shape& out_shape) {
    const int r = static_cast<int>(in_shape.size());
    out_shape.resize(r);
    std::array<int64_t, kMaxRank> in_strides{}, out_dims{}, gather{};
    int64_t s = 1;
    std::array<int64_t, kMaxRank> strides{};
    for (int i = r - 1; i >= 0; --i) {
        strides[i] = s;
        s *= in_shape[i];
    }
    for (int i = 0; i < r; ++i) {
        out_shape[i] = in_shape[perm[i]];
        out_dims[i] = out_shape[i];
        gather[i] = strides[perm[i]];
    }
    (void)in_strides;
    std::vector<T> out(static_cast<size_t>(numel(out_shape)));
    std::array<int64_t, kMaxRank> idx{};
    int64_t src_off = 0;
    const int64_t n = static_cast<int64_t>(out.size());
    for (int64_t oi = 0; oi < n; ++oi) {
        out[static_cast<size_t>(oi)] = src[src_off];
        for (int d = r - 1; d >= 0; --d) {
            ++idx[d];
            src_off += gather[d];
            if (idx[d] < out_dims[d]) break;
            src_off -= gather[d] * out_dims[d];
            idx[d] = 0;
        }
    }
    return out;
}

}  // namespace detail

// Axis permutation. The gradient is the inverse permutation of the upstream
// gradient.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x, std::vector<int> perm) {
    const int r = x.rank();
    require_shape(static_cast<int>(perm.size()) == r, "transpose: perm rank mismatch");
    std::vector<int> seen(r, 0);
    for (int p : perm) {
        require_shape(p >= 0 && p < r && !seen[p]++, "transpose: invalid permutation");
    }
    Shape out_shape;
    std::vector<T> vals = detail::permute_values(x.data(), x.shape(), perm, out_shape);
    Tensor<T> out = Tensor<T>::from(out_shape, std::move(vals));

    if (!x.tracked()) return out;
    std::vector<int> inv(r);
    for (int i = 0; i < r; ++i) inv[perm[i]] = i;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const Shape oshape = out.shape();
    const int node =
        tape->add_node(x.size(), [px, inv, oshape](Tape<T>& tp, const std::vector<T>& g) {
            Shape back;
            std::vector<T> gx = detail::permute_values(g.data(), oshape, inv, back);
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

// Concatenation along `axis`; all other dims must match.
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    require_shape(!parts.empty(), "concat: no inputs");
    const int r = parts[0].rank();
    if (axis < 0) axis += r;
    require_shape(axis >= 0 && axis < r, "concat: axis out of range");
    Shape out_shape = parts[0].shape();
    int axis_total = 0;
    for (const auto& p : parts) {
        require_shape(p.rank() == r, "concat: rank mismatch");
        for (int d = 0; d < r; ++d) {
            if (d == axis) continue;
            require_shape(p.shape()[d] == out_shape[d],
                          "concat: incompatible shapes " + shape_str(out_shape) + " vs " +
                              shape_str(p.shape()));
        }
        axis_total += p.shape()[axis];
    }
    out_shape[axis] = axis_total;

    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= out_shape[d];
    for (int d = axis + 1; d < r; ++d) inner *= out_shape[d];

    Tensor<T> out = Tensor<T>::alloc(out_shape);
    T* ov = out.mutable_data();
    const int64_t out_row = static_cast<int64_t>(axis_total) * inner;
    std::vector<int64_t> offsets(parts.size());
    {
        int64_t off = 0;
        for (size_t k = 0; k < parts.size(); ++k) {
            offsets[k] = off;
            const int64_t block = static_cast<int64_t>(parts[k].shape()[axis]) * inner;
            const T* pv = parts[k].data();
            for (int64_t o = 0; o < outer; ++o) {
                std::memcpy(ov + o * out_row + off, pv + o * block,
                            static_cast<size_t>(block) * sizeof(T));
            }
            off += block;
        }
    }

    std::vector<const Tensor<T>*> ptrs;
    for (const auto& p : parts) ptrs.push_back(&p);
    Tape<T>* tape = nullptr;
    for (const auto& p : parts) {
        if (p.tracked()) {
            require(!tape || tape == p.tape(), "operands belong to different tapes");
            tape = p.tape();
        }
    }
    if (!tape) return out;

    struct Piece {
        int node;
        int64_t offset;
        int64_t block;
    };
    std::vector<Piece> pieces;
    for (size_t k = 0; k < parts.size(); ++k) {
        if (!parts[k].tracked()) continue;
        pieces.push_back({parts[k].node(), offsets[k],
                          static_cast<int64_t>(parts[k].shape()[axis]) * inner});
    }
    const int node = tape->add_node(
        out.size(), [pieces, outer, out_row](Tape<T>& tp, const std::vector<T>& g) {
            for (const Piece& pc : pieces) {
                std::vector<T> gp(static_cast<size_t>(outer * pc.block));
                for (int64_t o = 0; o < outer; ++o) {
                    std::memcpy(gp.data() + o * pc.block, g.data() + o * out_row + pc.offset,
                                static_cast<size_t>(pc.block) * sizeof(T));
                }
                tp.accumulate(pc.node, gp);
            }
        });
    out.bind(tape, node);
    return out;
}

// Materializes x tiled up to `target`; the gradient sums back over the
// broadcast axes. Forward equals explicit tiling by construction.
template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& target) {
    detail::BcastPlan plan = detail::make_bcast_plan(x.shape(), target, "broadcast_to");
    require_shape(plan.out == target, "broadcast_to: " + shape_str(x.shape()) +
                                          " does not broadcast to " + shape_str(target));
    Tensor<T> out = Tensor<T>::alloc(target);
    const T* xv = x.data();
    T* ov = out.mutable_data();
    detail::bcast_iterate(plan, [&](int64_t oi, int64_t ai, int64_t) { ov[oi] = xv[ai]; });

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    const int64_t xn = x.size();
    const int node =
        tape->add_node(out.size(), [px, plan, xn](Tape<T>& tp, const std::vector<T>& g) {
            std::vector<T> gx(static_cast<size_t>(xn), T(0));
            detail::bcast_iterate(plan, [&](int64_t oi, int64_t ai, int64_t) {
                gx[static_cast<size_t>(ai)] += g[static_cast<size_t>(oi)];
            });
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

// ---------------------------------------------------------------------------
// Matmul and softmax
// ---------------------------------------------------------------------------

// Batched matrix product: (..., M, K) x (..., K, N) -> (..., M, N) with equal
// leading dims. Each output element accumulates over k in fixed order.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require_shape(a.rank() >= 2 && b.rank() >= 2, "matmul: operands must have rank >= 2");
    require_shape(a.rank() == b.rank(), "matmul: rank mismatch " + shape_str(a.shape()) +
                                            " vs " + shape_str(b.shape()));
    const int r = a.rank();
    for (int i = 0; i < r - 2; ++i) {
        require_shape(a.shape()[i] == b.shape()[i], "matmul: batch dims differ");
    }
    const int M = a.shape()[r - 2], K = a.shape()[r - 1];
    const int Kb = b.shape()[r - 2], N = b.shape()[r - 1];
    require_shape(K == Kb, "matmul: inner dims differ, " + shape_str(a.shape()) + " vs " +
                               shape_str(b.shape()));
    int64_t batch = 1;
    for (int i = 0; i < r - 2; ++i) batch *= a.shape()[i];

    Shape out_shape(a.shape());
    out_shape[r - 1] = N;
    Tensor<T> out = Tensor<T>::alloc(out_shape);
    const T* av = a.data();
    const T* bv = b.data();
    T* ov = out.mutable_data();
    parallel_for(batch, [&](int64_t i) {
        gemm_nn(av + i * M * K, bv + i * K * N, ov + i * M * N, M, K, N, false);
    });

    Tape<T>* tape = detail::merge_tapes<T>({&a, &b});
    if (!tape) return out;
    const int pa = a.tracked() ? a.node() : -1;
    const int pb = b.tracked() ? b.node() : -1;
    Tensor<T> adt = a.detach(), bdt = b.detach();
    const int node = tape->add_node(
        out.size(), [=](Tape<T>& tp, const std::vector<T>& g) {
            if (pa >= 0) {
                std::vector<T> ga(static_cast<size_t>(adt.size()));
                const T* bvv = bdt.data();
                parallel_for(batch, [&](int64_t i) {
                    gemm_nt(g.data() + i * M * N, bvv + i * K * N, ga.data() + i * M * K, M, N,
                            K, false);
                });
                tp.accumulate(pa, ga);
            }
            if (pb >= 0) {
                std::vector<T> gb(static_cast<size_t>(bdt.size()));
                const T* avv = adt.data();
                parallel_for(batch, [&](int64_t i) {
                    gemm_tn(avv + i * M * K, g.data() + i * M * N, gb.data() + i * K * N, K, M,
                            N, false);
                });
                tp.accumulate(pb, gb);
            }
        });
    out.bind(tape, node);
    return out;
}

// Numerically stable softmax over the last axis.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
    require_shape(x.rank() >= 1, "softmax: rank must be >= 1");
    const int cols = x.shape()[x.rank() - 1];
    const int64_t rows = x.size() / cols;
    Tensor<T> out = Tensor<T>::alloc(x.shape());
    const T* xv = x.data();
    T* ov = out.mutable_data();
    for (int64_t rix = 0; rix < rows; ++rix) {
        const T* xr = xv + rix * cols;
        T* orow = ov + rix * cols;
        T mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        T total = T(0);
        for (int j = 0; j < cols; ++j) {
            orow[j] = std::exp(xr[j] - mx);
            total += orow[j];
        }
        const T inv = T(1) / total;
        for (int j = 0; j < cols; ++j) orow[j] *= inv;
    }

    if (!x.tracked()) return out;
    Tape<T>* tape = x.tape();
    const int px = x.node();
    Tensor<T> od = out.detach();
    const int node =
        tape->add_node(x.size(), [px, od, rows, cols](Tape<T>& tp, const std::vector<T>& g) {
            const T* yv = od.data();
            std::vector<T> gx(g.size());
            for (int64_t rix = 0; rix < rows; ++rix) {
                const T* yr = yv + rix * cols;
                const T* gr = g.data() + rix * cols;
                T dot = T(0);
                for (int j = 0; j < cols; ++j) dot += gr[j] * yr[j];
                T* gxr = gx.data() + rix * cols;
                for (int j = 0; j < cols; ++j) gxr[j] = yr[j] * (gr[j] - dot);
            }
            tp.accumulate(px, gx);
        });
    out.bind(tape, node);
    return out;
}

// Per-pixel sum over prediction branches. Values are ordered before adding so
// the result is bit-identical under any permutation of the branch list; each
// branch receives the plain upstream gradient.
template <typename T>
Tensor<T> sum_branches(const std::vector<Tensor<T>>& branches) {
    require_shape(!branches.empty(), "sum_branches: no inputs");
    for (const auto& b : branches) {
        require_shape(b.shape() == branches[0].shape(),
                      "sum_branches: mismatched shapes " + shape_str(branches[0].shape()) +
                          " vs " + shape_str(b.shape()));
    }
    const size_t k = branches.size();
    const int64_t n = branches[0].size();
    Tensor<T> out = Tensor<T>::alloc(branches[0].shape());
    T* ov = out.mutable_data();
    std::vector<const T*> srcs(k);
    for (size_t i = 0; i < k; ++i) srcs[i] = branches[i].data();
    std::vector<T> buf(k);
    for (int64_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < k; ++j) buf[j] = srcs[j][i];
        std::sort(buf.begin(), buf.end());
        T acc = T(0);
        for (size_t j = 0; j < k; ++j) acc += buf[j];
        ov[i] = acc;
    }

    Tape<T>* tape = nullptr;
    for (const auto& b : branches) {
        if (b.tracked()) {
            require(!tape || tape == b.tape(), "operands belong to different tapes");
            tape = b.tape();
        }
    }
    if (!tape) return out;
    std::vector<int> parents;
    for (const auto& b : branches) {
        if (b.tracked()) parents.push_back(b.node());
    }
    const int node =
        tape->add_node(out.size(), [parents](Tape<T>& tp, const std::vector<T>& g) {
            for (int p : parents) tp.accumulate(p, g);
        });
    out.bind(tape, node);
    return out;
}

}  // namespace sodboost
