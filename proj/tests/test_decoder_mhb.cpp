#include <gtest/gtest.h>

#include "sodboost/losses.hpp"
#include "sodboost/nn/decoder.hpp"

using namespace sodboost;
using Td = Tensor<double>;

namespace {

Td random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<size_t>(numel(shape)));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Td::from(std::move(shape), std::move(v));
}

std::array<Td, 4> random_pyramid(Rng& rng, int channels, int finest) {
    std::array<Td, 4> fused;
    int size = finest;
    for (int i = 0; i < 4; ++i) {
        fused[static_cast<size_t>(i)] = random_tensor(rng, {1, channels, size, size});
        size /= 2;
    }
    return fused;
}

}  // namespace

TEST(Decoder, ToyLevelSizes) {
    Rng rng(1);
    Decoder<double> dec;
    dec.init(rng, 8);
    Ctx<double> ctx{nullptr, true};
    auto fused = random_pyramid(rng, 8, 32);  // 64x64 input -> strides 2..16
    DecoderState<double> state = dec.forward(ctx, fused);
    const int sizes[4] = {32, 16, 8, 4};
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(state.cb_outputs[static_cast<size_t>(i)].dim(2), sizes[i]);
        EXPECT_EQ(state.cb_outputs[static_cast<size_t>(i)].dim(2),
                  fused[static_cast<size_t>(i)].dim(2));
    }
    EXPECT_EQ(state.final_feature.dim(2), 32);
}

TEST(Decoder, BrokenStrideChainRejected) {
    Rng rng(2);
    Decoder<double> dec;
    dec.init(rng, 8);
    Ctx<double> ctx{nullptr, true};
    std::array<Td, 4> fused = {
        random_tensor(rng, {1, 8, 32, 32}), random_tensor(rng, {1, 8, 16, 16}),
        random_tensor(rng, {1, 8, 4, 4}),  // skipped a level
        random_tensor(rng, {1, 8, 2, 2})};
    EXPECT_THROW(dec.forward(ctx, fused), ShapeError);
}

TEST(Decoder, CeilHalvedChainAccepted) {
    // A 7 -> 4 transition (ceil semantics) is a legal chain.
    Rng rng(3);
    Decoder<double> dec;
    dec.init(rng, 8);
    Ctx<double> ctx{nullptr, true};
    std::array<Td, 4> fused = {
        random_tensor(rng, {1, 8, 28, 28}), random_tensor(rng, {1, 8, 14, 14}),
        random_tensor(rng, {1, 8, 7, 7}), random_tensor(rng, {1, 8, 4, 4})};
    DecoderState<double> state = dec.forward(ctx, fused);
    EXPECT_EQ(state.final_feature.dim(2), 28);
}

TEST(Decoder, ZeroFeaturesStayFinite) {
    Rng rng(4);
    Decoder<double> dec;
    dec.init(rng, 8);
    Ctx<double> ctx{nullptr, true};
    std::array<Td, 4> fused = {Td::zeros({1, 8, 16, 16}), Td::zeros({1, 8, 8, 8}),
                               Td::zeros({1, 8, 4, 4}), Td::zeros({1, 8, 2, 2})};
    DecoderState<double> state = dec.forward(ctx, fused);
    for (const auto& t : state.cb_outputs) {
        for (double v : t.values()) ASSERT_TRUE(std::isfinite(v));
    }
    for (const auto& t : dec.aux_logits(ctx, state, 32, 32)) {
        for (double v : t.values()) ASSERT_TRUE(std::isfinite(v));
    }
}

TEST(MhbHead, BranchCountAndShapes) {
    Rng rng(5);
    MhbHead<double> head;
    head.init(rng, 8, 4);
    EXPECT_EQ(head.dilations, (std::vector<int>{1, 2, 4, 8}));
    Ctx<double> ctx{nullptr, true};
    Td f = random_tensor(rng, {2, 8, 16, 16});
    auto logits = head.forward(ctx, f, 32, 32);
    ASSERT_EQ(logits.size(), 4u);
    for (const auto& l : logits) EXPECT_EQ(l.shape(), (Shape{2, 1, 32, 32}));
}

TEST(MhbHead, ZeroWeightsGiveBiasConstantLogits) {
    Rng rng(6);
    MhbHead<double> head;
    head.init(rng, 4, 3);
    for (int i = 0; i < 3; ++i) {
        auto& conv = head.convs[static_cast<size_t>(i)];
        std::fill(conv.conv.weight.value.begin(), conv.conv.weight.value.end(), 0.0);
        auto& lg = head.heads[static_cast<size_t>(i)];
        std::fill(lg.weight.value.begin(), lg.weight.value.end(), 0.0);
        lg.bias.value[0] = 0.25 * (i + 1);
    }
    Ctx<double> ctx{nullptr, true};
    Td f = random_tensor(rng, {1, 4, 8, 8});
    auto logits = head.forward(ctx, f, 8, 8);
    for (int i = 0; i < 3; ++i) {
        for (double v : logits[static_cast<size_t>(i)].values()) {
            ASSERT_NEAR(v, 0.25 * (i + 1), 1e-12);
        }
    }
}

TEST(MhbHead, EachBranchMatchesStandaloneRecomposition) {
    Rng rng(7);
    MhbHead<double> head;
    head.init(rng, 6, 4);
    // Heads are zero-initialized; give them content for the comparison.
    for (auto& h : head.heads) {
        for (auto& v : h.weight.value) v = rng.uniform(-0.5, 0.5);
        for (auto& v : h.bias.value) v = rng.uniform(-0.2, 0.2);
    }
    for (auto& bn : head.convs) {
        for (auto& v : bn.bn.running_mean) v = rng.uniform(-0.2, 0.2);
        for (auto& v : bn.bn.running_var) v = rng.uniform(0.5, 1.5);
    }
    Ctx<double> ctx;  // eval mode
    Td f = random_tensor(rng, {1, 6, 8, 8});
    auto logits = head.forward(ctx, f, 16, 16);
    for (int i = 0; i < 4; ++i) {
        const int d = head.dilations[static_cast<size_t>(i)];
        auto& blk = head.convs[static_cast<size_t>(i)];
        Td h = conv2d(f, Td::from(blk.conv.weight.shape, blk.conv.weight.value), 1, d, d);
        // eval-mode batchnorm as explicit affine
        const int C = h.dim(1);
        std::vector<double> scale(static_cast<size_t>(C)), shift(static_cast<size_t>(C));
        for (int c = 0; c < C; ++c) {
            const double inv = 1.0 / std::sqrt(blk.bn.running_var[static_cast<size_t>(c)] + 1e-5);
            scale[static_cast<size_t>(c)] = blk.bn.gamma.value[static_cast<size_t>(c)] * inv;
            shift[static_cast<size_t>(c)] =
                blk.bn.beta.value[static_cast<size_t>(c)] -
                blk.bn.running_mean[static_cast<size_t>(c)] * scale[static_cast<size_t>(c)];
        }
        h = relu(add(mul(h, Td::from({1, C, 1, 1}, std::move(scale))),
                     Td::from({1, C, 1, 1}, std::move(shift))));
        auto& lg = head.heads[static_cast<size_t>(i)];
        Td want = bilinear_resize(
            conv2d(h, Td::from(lg.weight.shape, lg.weight.value),
                   std::optional<Td>(Td::from(lg.bias.shape, lg.bias.value))),
            16, 16);
        const Td& got = logits[static_cast<size_t>(i)];
        ASSERT_EQ(got.shape(), want.shape());
        for (int64_t j = 0; j < got.size(); ++j) {
            ASSERT_NEAR(got.values()[j], want.values()[j], 1e-11) << "branch " << i;
        }
    }
}

TEST(SelectBranch, SingleBranchAlwaysFirst) {
    Rng rng(8);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(select_branch(rng, 1), 0);
}

TEST(SelectBranch, UniformWithinFourSigma) {
    Rng rng(9);
    const int draws = 10000, n = 4;
    std::array<int, 4> counts{};
    for (int i = 0; i < draws; ++i) ++counts[static_cast<size_t>(select_branch(rng, n))];
    const double expected = draws / static_cast<double>(n);
    const double sigma = std::sqrt(draws * 0.25 * 0.75);
    for (int c : counts) EXPECT_NEAR(c, expected, 4.0 * sigma);
}

TEST(SelectBranch, DeterministicUnderFixedSeed) {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(select_branch(a, 4), select_branch(b, 4));
}

TEST(BoostingWeight, AllOtherBranchesCorrectGivesOne) {
    // Saturated logits on the non-selected branches: p == g after clamping,
    // so their error maps are epsilon-level and the weight is 1 up to them.
    const Shape s{1, 1, 4, 4};
    Rng rng(10);
    std::vector<double> gv(16);
    for (auto& v : gv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    Td g = Td::from(s, gv);
    std::vector<Td> logits;
    for (int b = 0; b < 4; ++b) {
        std::vector<double> lv(16);
        for (int i = 0; i < 16; ++i) lv[static_cast<size_t>(i)] = gv[static_cast<size_t>(i)] > 0.5 ? 50.0 : -50.0;
        logits.push_back(Td::from(s, std::move(lv)));
    }
    Td w = boosting_weight(logits, 2, g);
    for (double v : w.values()) ASSERT_NEAR(v, 1.0, 1e-6);
}

TEST(BoostingWeight, ThreeHalfConfidentBranches) {
    // Three non-selected branches predicting 0.5 everywhere: 3*ln2 + 1.
    const Shape s{1, 1, 3, 3};
    Td g = Td::from(s, {1, 0, 1, 0, 1, 0, 1, 0, 1});
    std::vector<Td> logits(4, Td::zeros(s));  // sigmoid(0) = 0.5
    Td w = boosting_weight(logits, 0, g);
    const double want = 3.0 * std::log(2.0) + 1.0;
    for (double v : w.values()) ASSERT_NEAR(v, want, 1e-12);
    EXPECT_NEAR(want, 3.0794, 1e-4);
}

TEST(BoostingWeight, MatchesPerPixelScalarLoopOracle) {
    Rng rng(11);
    const Shape s{1, 1, 8, 8};
    std::vector<double> gv(64);
    for (auto& v : gv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    Td g = Td::from(s, gv);
    std::vector<Td> logits;
    for (int b = 0; b < 4; ++b) logits.push_back(random_tensor(rng, s, -3, 3));
    const int selected = 1;
    Td w = boosting_weight(logits, selected, g);

    const double eps = 1e-7;
    for (int i = 0; i < 64; ++i) {
        double acc = 1.0;
        for (int b = 0; b < 4; ++b) {
            if (b == selected) continue;
            const double logit = logits[static_cast<size_t>(b)].values()[static_cast<size_t>(i)];
            double p = 1.0 / (1.0 + std::exp(-logit));
            p = std::min(std::max(p, eps), 1.0 - eps);
            const double gi = gv[static_cast<size_t>(i)];
            acc += -(gi * std::log(p) + (1.0 - gi) * std::log(1.0 - p));
        }
        ASSERT_NEAR(w.values()[static_cast<size_t>(i)], acc, 1e-12);
    }
}

TEST(BoostingWeight, AlwaysAtLeastOne) {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const Shape s{1, 1, 5, 5};
        std::vector<double> gv(25);
        for (auto& v : gv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        std::vector<Td> logits;
        for (int b = 0; b < 3; ++b) logits.push_back(random_tensor(rng, s, -6, 6));
        Td w = boosting_weight(logits, static_cast<int>(rng.uniform_int(3)), Td::from(s, gv));
        for (double v : w.values()) ASSERT_GE(v, 1.0);
    }
}

TEST(BoostingWeight, CarriesNoTape) {
    Rng rng(13);
    Tape<double> tape;
    Parameter<double> p;
    p.init({1, 1, 2, 2}, {0.5, -0.5, 1.0, -1.0});
    Td tracked = tape.watch(p);
    std::vector<Td> logits{tracked, random_tensor(rng, {1, 1, 2, 2})};
    Td g = Td::from({1, 1, 2, 2}, {1, 0, 1, 0});
    const size_t nodes_before = tape.node_count();
    Td w = boosting_weight(logits, 1, g);
    EXPECT_FALSE(w.tracked());
    EXPECT_EQ(tape.node_count(), nodes_before);
}

TEST(Aggregate, AllZeroLogitsGiveHalf) {
    std::vector<Td> logits(4, Td::zeros({1, 1, 3, 3}));
    Td out = aggregate_inference(logits);
    for (double v : out.values()) ASSERT_DOUBLE_EQ(v, 0.5);
}

TEST(Aggregate, SingleBranchIsPlainSigmoid) {
    Rng rng(14);
    Td l = random_tensor(rng, {1, 1, 4, 4}, -3, 3);
    Td out = aggregate_inference(std::vector<Td>{l});
    for (int64_t i = 0; i < l.size(); ++i) {
        ASSERT_DOUBLE_EQ(out.values()[i], 1.0 / (1.0 + std::exp(-l.values()[i])));
    }
}

TEST(Aggregate, MatchesScalarOracle) {
    Rng rng(15);
    std::vector<Td> logits;
    for (int b = 0; b < 4; ++b) logits.push_back(random_tensor(rng, {1, 1, 5, 5}, -4, 4));
    Td out = aggregate_inference(logits);
    for (int64_t i = 0; i < out.size(); ++i) {
        std::vector<double> vals;
        for (const auto& l : logits) vals.push_back(l.values()[i]);
        std::sort(vals.begin(), vals.end());
        double s = 0;
        for (double v : vals) s += v;
        ASSERT_DOUBLE_EQ(out.values()[i], 1.0 / (1.0 + std::exp(-s)));
    }
}

TEST(MhbHead, DilationTooLargeForFeatureRejected) {
    Rng rng(16);
    MhbHead<double> head;
    head.init(rng, 4, 5);  // dilations 1,2,4,8,16
    Ctx<double> ctx{nullptr, true};
    Td tiny = random_tensor(rng, {1, 4, 2, 2});
    EXPECT_THROW(head.forward(ctx, tiny, 4, 4), ValueError);
}
