#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sodboost/losses.hpp"
#include "sodboost/nn/af_fusion.hpp"
#include "sodboost/nn/decoder.hpp"
#include "sodboost/nn/semantic_backbone.hpp"
#include "sodboost/ops.hpp"
#include "sodboost/window.hpp"

namespace sodboost {

struct GradCheckRow {
    std::string name;
    double max_err = 0.0;
    int components = 0;

    bool pass(double tol = 1e-4) const { return max_err <= tol; }
};

// Central finite-difference verification of reverse-mode gradients, always in
// 64-bit. The numeric side only ever evaluates forward passes, so it stays
// independent of the backward implementation it checks.
class GradChecker {
public:
    static constexpr double kStep = 1e-5;
    static constexpr double kTolerance = 1e-4;
    static constexpr int kMaxComponents = 48;

    struct Input {
        Shape shape;
        double lo = 0.2, hi = 1.5;
        bool random_sign = true;
    };

    using BuildFn = std::function<Tensor<double>(const Ctx<double>&,
                                                 const std::vector<Tensor<double>>&)>;

    explicit GradChecker(uint64_t seed) : rng_(seed) {}

    // Builds the loss from the lifted inputs, compares reverse-mode gradients
    // of every input (and every extra module parameter) against central
    // differences, and records the worst scaled error.
    double check(const std::string& name, const std::vector<Input>& specs, BuildFn f,
                 std::vector<Parameter<double>*> extra_params = {}, bool training = true) {
        std::vector<Parameter<double>> inputs(specs.size());
        for (size_t i = 0; i < specs.size(); ++i) {
            const Input& spec = specs[i];
            std::vector<double> v(static_cast<size_t>(numel(spec.shape)));
            for (auto& x : v) {
                x = rng_.uniform(spec.lo, spec.hi);
                if (spec.random_sign && rng_.bernoulli(0.5)) x = -x;
            }
            inputs[i].init(spec.shape, std::move(v));
        }

        // Fixed contraction weights so non-scalar outputs reduce to one loss.
        Tensor<double> weights;
        const auto loss_of = [&](const Ctx<double>& ctx) {
            std::vector<Tensor<double>> xs;
            xs.reserve(inputs.size());
            for (auto& p : inputs) xs.push_back(ctx.use(p));
            Tensor<double> y = f(ctx, xs);
            if (y.size() == 1) return y;
            if (!weights.defined()) {
                std::vector<double> w(static_cast<size_t>(y.size()));
                for (auto& x : w) x = rng_.uniform(-1.0, 1.0);
                weights = Tensor<double>::from(y.shape(), std::move(w));
            }
            return sum(mul(y, weights));
        };

        for (auto* p : extra_params) p->zero_grad();

        Tape<double> tape;
        Ctx<double> train_ctx{&tape, training};
        Tensor<double> loss = loss_of(train_ctx);
        tape.backward(loss);

        std::vector<Parameter<double>*> checked;
        for (auto& p : inputs) checked.push_back(&p);
        for (auto* p : extra_params) checked.push_back(p);

        Ctx<double> eval_ctx{nullptr, training};
        GradCheckRow row{name, 0.0, 0};
        for (Parameter<double>* p : checked) {
            const int64_t n = p->size();
            const int64_t samples = std::min<int64_t>(n, kMaxComponents);
            for (int64_t s = 0; s < samples; ++s) {
                const int64_t j = samples == n ? s : (s * n) / samples;
                const double saved = p->value[static_cast<size_t>(j)];
                p->value[static_cast<size_t>(j)] = saved + kStep;
                const double up = loss_of(eval_ctx).value();
                p->value[static_cast<size_t>(j)] = saved - kStep;
                const double down = loss_of(eval_ctx).value();
                p->value[static_cast<size_t>(j)] = saved;
                const double numeric = (up - down) / (2.0 * kStep);
                const double analytic = p->has_grad ? p->grad[static_cast<size_t>(j)] : 0.0;
                const double err = std::abs(analytic - numeric) /
                                   std::max(std::abs(analytic) + std::abs(numeric), 1.0);
                row.max_err = std::max(row.max_err, err);
                ++row.components;
            }
        }
        for (auto* p : extra_params) p->zero_grad();
        rows_.push_back(row);
        return row.max_err;
    }

    const std::vector<GradCheckRow>& rows() const { return rows_; }
    Rng& rng() { return rng_; }

private:
    Rng rng_;
    std::vector<GradCheckRow> rows_;
};

namespace gradcheck_detail {

inline Tensor<double> random_binary_mask(Rng& rng, const Shape& shape) {
    std::vector<double> g(static_cast<size_t>(numel(shape)));
    for (auto& v : g) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    // Guarantee both classes appear.
    g.front() = 1.0;
    g.back() = 0.0;
    return Tensor<double>::from(shape, std::move(g));
}

inline Tensor<double> fixed_weights(Rng& rng, const Shape& shape) {
    std::vector<double> w(static_cast<size_t>(numel(shape)));
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    return Tensor<double>::from(shape, std::move(w));
}

}  // namespace gradcheck_detail

// The full differentiation audit: every primitive the network uses, the
// attention/window composition, the fusion module, the decoder with the
// multi-branch head, and every loss. Returns one row per case.
inline std::vector<GradCheckRow> run_gradcheck(uint64_t seed) {
    using Td = Tensor<double>;
    GradChecker gc(seed);
    using In = GradChecker::Input;

    gc.check("add_broadcast", {In{{2, 3, 4}}, In{{3, 1}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) { return add(xs[0], xs[1]); });
    gc.check("sub", {In{{2, 3, 4}}, In{{2, 3, 4}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) { return sub(xs[0], xs[1]); });
    gc.check("mul_broadcast", {In{{2, 3, 4}}, In{{1, 3, 1}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) { return mul(xs[0], xs[1]); });
    gc.check("div", {In{{2, 6}}, In{{2, 6}, 0.5, 2.0, false}},
             [](const Ctx<double>&, const std::vector<Td>& xs) { return div(xs[0], xs[1]); });
    gc.check("one_minus_neg", {In{{3, 4}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return one_minus(neg(xs[0]));
             });
    gc.check("log", {In{{3, 4}, 0.2, 2.0, false}},
             [](const Ctx<double>&, const std::vector<Td>& xs) { return log(xs[0]); });
    gc.check("relu", {In{{2, 3, 4}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) { return relu(xs[0]); });
    gc.check("sigmoid", {In{{2, 3, 4}, 0.1, 2.5}},
             [](const Ctx<double>&, const std::vector<Td>& xs) { return sigmoid(xs[0]); });
    gc.check("clamp_interior", {In{{3, 3}, 0.05, 0.45}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return clamp(xs[0], -0.5, 0.5);
             });
    gc.check("mean", {In{{4, 5}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) { return mean(xs[0]); });
    gc.check("matmul", {In{{2, 3, 4}}, In{{2, 4, 5}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return matmul(xs[0], xs[1]);
             });
    gc.check("softmax", {In{{3, 5}, 0.1, 2.0}},
             [](const Ctx<double>&, const std::vector<Td>& xs) { return softmax(xs[0]); });
    gc.check("concat_channels", {In{{1, 2, 3, 3}}, In{{1, 3, 3, 3}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return concat<double>({xs[0], xs[1]}, 1);
             });
    gc.check("transpose_reshape", {In{{2, 3, 4}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return reshape(transpose(xs[0], {2, 0, 1}), Shape{4, 6});
             });
    gc.check("broadcast_to", {In{{1, 3, 1, 2}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return broadcast_to(xs[0], Shape{2, 3, 4, 2});
             });
    gc.check("sum_branches", {In{{1, 1, 3, 3}}, In{{1, 1, 3, 3}}, In{{1, 1, 3, 3}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return sum_branches<double>({xs[0], xs[1], xs[2]});
             });

    gc.check("conv2d", {In{{2, 3, 6, 6}}, In{{4, 3, 3, 3}, 0.1, 0.8}, In{{4}, 0.0, 0.3, true}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return conv2d(xs[0], xs[1], std::optional<Td>(xs[2]), 1, 1, 1);
             });
    gc.check("conv2d_strided", {In{{1, 2, 7, 7}}, In{{3, 2, 3, 3}, 0.1, 0.8}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return conv2d(xs[0], xs[1], std::optional<Td>{}, 2, 1, 1);
             });
    gc.check("conv2d_dilated", {In{{1, 2, 8, 8}}, In{{2, 2, 3, 3}, 0.1, 0.8}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return conv2d(xs[0], xs[1], std::optional<Td>{}, 1, 2, 2);
             });

    {
        auto rm = std::make_shared<std::vector<double>>(4, 0.0);
        auto rv = std::make_shared<std::vector<double>>(4, 1.0);
        gc.check("batchnorm_train",
                 {In{{3, 4, 5, 5}}, In{{4}, 0.5, 1.5, false}, In{{4}, 0.0, 0.4}},
                 [rm, rv](const Ctx<double>& ctx, const std::vector<Td>& xs) {
                     return batchnorm2d(xs[0], xs[1], xs[2], *rm, *rv, ctx.training);
                 });
    }
    {
        auto rm = std::make_shared<std::vector<double>>(std::vector<double>{0.1, -0.2, 0.3});
        auto rv = std::make_shared<std::vector<double>>(std::vector<double>{0.9, 1.4, 0.6});
        gc.check("batchnorm_eval",
                 {In{{2, 3, 4, 4}}, In{{3}, 0.5, 1.5, false}, In{{3}, 0.0, 0.4}},
                 [rm, rv](const Ctx<double>&, const std::vector<Td>& xs) {
                     return batchnorm2d(xs[0], xs[1], xs[2], *rm, *rv, false);
                 });
    }
    gc.check("layernorm", {In{{4, 6}}, In{{6}, 0.5, 1.5, false}, In{{6}, 0.0, 0.4}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return layernorm(xs[0], xs[1], xs[2]);
             });

    gc.check("bilinear_resize", {In{{1, 2, 4, 5}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return bilinear_resize(xs[0], 7, 9);
             });
    gc.check("avg_pool_edge_pad", {In{{1, 2, 5, 5}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) { return avg_pool(xs[0], 2); });
    gc.check("max_pool", {In{{1, 2, 6, 6}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) { return max_pool(xs[0], 3); });
    gc.check("global_avg_pool", {In{{2, 3, 4, 4}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return global_avg_pool(xs[0]);
             });
    gc.check("pad_edge_crop", {In{{1, 2, 4, 4}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return crop2d(pad_edge2d(xs[0], 1, 2), 4, 4);
             });
    gc.check("roll2d", {In{{1, 2, 4, 5}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return roll2d(xs[0], 1, -2);
             });
    gc.check("window_round_trip", {In{{1, 3, 4, 6}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return window_merge(window_partition(xs[0], 2), 2, 4, 6);
             });
    gc.check("space_to_depth", {In{{1, 3, 4, 4}}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return space_to_depth2(xs[0]);
             });
    {
        const std::vector<int> idx = relative_position_index(2);
        gc.check("relpos_bias_gather", {In{{2, 9}}},
                 [idx](const Ctx<double>&, const std::vector<Td>& xs) {
                     return bias_from_table(xs[0], idx, 4);
                 });
    }
    gc.check("attention",
             {In{{2, 4, 8}, 0.1, 1.0}, In{{2, 4, 8}, 0.1, 1.0}, In{{2, 4, 8}, 0.1, 1.0},
              In{{1, 2, 4, 4}, 0.0, 0.5}},
             [](const Ctx<double>&, const std::vector<Td>& xs) {
                 return attention(xs[0], xs[1], xs[2], 2, std::optional<Td>(xs[3]));
             });

    // Composed attention block with shift, padding and masking.
    {
        auto block = std::make_shared<WindowBlock<double>>();
        block->init(gc.rng(), /*dim=*/8, /*heads=*/2, /*grid=*/6, /*window=*/4,
                    /*shifted=*/true);
        ModuleItems<double> items;
        block->collect("blk", items);
        std::vector<Parameter<double>*> params;
        for (auto& kv : items.params) params.push_back(kv.second);
        gc.check("window_block",
                 {In{{1, 8, 6, 6}, 0.1, 0.8}},
                 [block](const Ctx<double>& ctx, const std::vector<Td>& xs) {
                     return block->forward(ctx, xs[0]);
                 },
                 params);
    }

    // Composed fusion of the two branch features.
    {
        auto fuse = std::make_shared<AfFusion<double>>();
        fuse->init(gc.rng(), /*in_x=*/6, /*in_y=*/5, /*common=*/8);
        ModuleItems<double> items;
        fuse->collect("af", items);
        std::vector<Parameter<double>*> params;
        for (auto& kv : items.params) params.push_back(kv.second);
        gc.check("af_fuse",
                 {In{{1, 6, 3, 3}, 0.1, 0.8}, In{{1, 5, 6, 6}, 0.1, 0.8}},
                 [fuse](const Ctx<double>& ctx, const std::vector<Td>& xs) {
                     return fuse->forward(ctx, xs[0], xs[1]);
                 },
                 params);
    }

    // Composed decoder with the dilated multi-branch head.
    {
        auto dec = std::make_shared<Decoder<double>>();
        auto head = std::make_shared<MhbHead<double>>();
        dec->init(gc.rng(), 8);
        head->init(gc.rng(), 8, 3);
        ModuleItems<double> items;
        dec->collect("dec", items);
        head->collect("mhb", items);
        std::vector<Parameter<double>*> params;
        for (auto& kv : items.params) {
            // The logit heads ship zero-initialized, which would zero out the
            // trunk gradients here; randomize them so the whole path is live.
            Parameter<double>* p = kv.second;
            bool all_zero = true;
            for (double v : p->value) all_zero = all_zero && v == 0.0;
            if (all_zero) {
                for (auto& v : p->value) v = gc.rng().uniform(-0.5, 0.5);
            }
            params.push_back(p);
        }
        std::vector<Td> ws;
        for (int i = 0; i < 7; ++i) {
            ws.push_back(gradcheck_detail::fixed_weights(gc.rng(), Shape{1, 1, 8, 8}));
        }
        gc.check("decoder_mhb_head",
                 {In{{1, 8, 8, 8}, 0.1, 0.6}, In{{1, 8, 4, 4}, 0.1, 0.6},
                  In{{1, 8, 2, 2}, 0.1, 0.6}, In{{1, 8, 1, 1}, 0.1, 0.6}},
                 [dec, head, ws](const Ctx<double>& ctx, const std::vector<Td>& xs) {
                     DecoderState<double> st =
                         dec->forward(ctx, {xs[0], xs[1], xs[2], xs[3]});
                     std::vector<Td> aux = dec->aux_logits(ctx, st, 8, 8);
                     std::vector<Td> logits = head->forward(ctx, st.final_feature, 8, 8);
                     Tensor<double> loss;
                     size_t k = 0;
                     for (const auto& t : aux) {
                         Tensor<double> term = sum(mul(t, ws[k++]));
                         loss = loss.defined() ? add(loss, term) : term;
                     }
                     for (const auto& t : logits) loss = add(loss, sum(mul(t, ws[k++])));
                     return loss;
                 },
                 params);
    }

    // Losses.
    {
        const Shape s{1, 1, 4, 4};
        Td g = gradcheck_detail::random_binary_mask(gc.rng(), s);
        gc.check("bce_map", {In{s, 0.1, 0.9, false}},
                 [g](const Ctx<double>&, const std::vector<Td>& xs) {
                     return bce_map(xs[0], g);
                 });
        gc.check("wbce", {In{s, 0.1, 0.9, false}, In{s, 0.5, 2.0, false}},
                 [g](const Ctx<double>&, const std::vector<Td>& xs) {
                     return wbce(xs[0], g, xs[1]);
                 });
        gc.check("wiou", {In{s, 0.1, 0.9, false}, In{s, 0.5, 2.0, false}},
                 [g](const Ctx<double>&, const std::vector<Td>& xs) {
                     return wiou(xs[0], g, xs[1]);
                 });
        gc.check("boost_loss", {In{s, 0.1, 0.9, false}, In{s, 0.5, 2.0, false}},
                 [g](const Ctx<double>&, const std::vector<Td>& xs) {
                     return boost_loss(xs[0], g, xs[1]);
                 });
        // Full training loss with the error weight held fixed at its base
        // value, exactly as a training step treats it.
        Rng wrng = gc.rng().fork(77);
        std::vector<double> base_logits(static_cast<size_t>(numel(s)));
        std::vector<Td> frozen;
        for (int b = 0; b < 3; ++b) {
            for (auto& v : base_logits) v = wrng.uniform(-1.5, 1.5);
            frozen.push_back(Tensor<double>::from(s, base_logits));
        }
        Td weight = boosting_weight(frozen, 1, g);
        gc.check("total_loss_fixed_weight",
                 {In{s, 0.2, 1.5}, In{s, 0.2, 1.5}, In{s, 0.2, 1.5}, In{s, 0.2, 1.5},
                  In{s, 0.2, 1.5}},
                 [g, weight](const Ctx<double>&, const std::vector<Td>& xs) {
                     const std::vector<Td> aux{xs[0], xs[1]};
                     const std::vector<Td> branches{xs[2], xs[3], xs[4]};
                     return total_loss(aux, branches, 1, g, weight).total;
                 });
    }

    return gc.rows();
}

}  // namespace sodboost
