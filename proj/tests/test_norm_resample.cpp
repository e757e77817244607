#include <gtest/gtest.h>

#include "sodboost/norm.hpp"
#include "sodboost/resample.hpp"
#include "sodboost/rng.hpp"

using namespace sodboost;
using Td = Tensor<double>;

namespace {

Td random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<size_t>(numel(shape)));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Td::from(std::move(shape), std::move(v));
}

}  // namespace

TEST(BatchNorm, ConstantInputNormalizesToZero) {
    Td x = Td::full({2, 3, 4, 4}, 5.0);
    Td gamma = Td::full({3}, 1.0);
    Td beta = Td::zeros({3});
    std::vector<double> rm(3, 0.0), rv(3, 1.0);
    Td y = batchnorm2d(x, gamma, beta, rm, rv, /*training=*/true);
    for (double v : y.values()) EXPECT_NEAR(v, 0.0, 1e-12);  // eps guards the division
}

TEST(BatchNorm, TrainThenEvalMatchesIndependentlyRecomputedStats) {
    Rng rng(41);
    Td x = random_tensor(rng, {4, 3, 5, 5}, -2.0, 2.0);
    Td gamma = Td::from({3}, {1.2, 0.8, 1.0});
    Td beta = Td::from({3}, {0.1, -0.2, 0.0});
    std::vector<double> rm(3, 0.0), rv(3, 1.0);

    Td train_out = batchnorm2d(x, gamma, beta, rm, rv, true);
    (void)train_out;

    // Recompute the running statistics independently: one training pass from
    // the initial buffers with momentum 0.1 and an unbiased variance.
    const int64_t m = 4 * 5 * 5;
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int n = 0; n < 4; ++n) {
            for (int i = 0; i < 25; ++i) {
                const double v = x.at({n, c, i / 5, i % 5});
                sum += v;
                sq += v * v;
            }
        }
        const double mean_c = sum / static_cast<double>(m);
        const double var_b = sq / static_cast<double>(m) - mean_c * mean_c;
        const double var_u = var_b * static_cast<double>(m) / static_cast<double>(m - 1);
        EXPECT_NEAR(rm[static_cast<size_t>(c)], 0.9 * 0.0 + 0.1 * mean_c, 1e-10);
        EXPECT_NEAR(rv[static_cast<size_t>(c)], 0.9 * 1.0 + 0.1 * var_u, 1e-9);
    }

    // Eval output must equal the affine map built from the recorded buffers.
    Rng rng2(42);
    Td x2 = random_tensor(rng2, {2, 3, 5, 5}, -2.0, 2.0);
    Td eval_out = batchnorm2d(x2, gamma, beta, rm, rv, false);
    for (int n = 0; n < 2; ++n) {
        for (int c = 0; c < 3; ++c) {
            const double inv = 1.0 / std::sqrt(rv[static_cast<size_t>(c)] + 1e-5);
            for (int i = 0; i < 25; ++i) {
                const double want = gamma.at({c}) * (x2.at({n, c, i / 5, i % 5}) -
                                                     rm[static_cast<size_t>(c)]) *
                                        inv +
                                    beta.at({c});
                ASSERT_NEAR(eval_out.at({n, c, i / 5, i % 5}), want, 1e-12);
            }
        }
    }
}

TEST(BatchNorm, ZeroSizeReductionAxisRejected) {
    Td x = Td::zeros({1, 3, 0, 4});
    Td gamma = Td::full({3}, 1.0);
    Td beta = Td::zeros({3});
    std::vector<double> rm(3, 0.0), rv(3, 1.0);
    EXPECT_THROW(batchnorm2d(x, gamma, beta, rm, rv, true), ShapeError);
}

TEST(LayerNorm, UnitVarianceStandardization) {
    Td x = Td::from({1, 3}, {1.0, 2.0, 3.0});
    Td gamma = Td::full({3}, 1.0);
    Td beta = Td::zeros({3});
    Td y = layernorm(x, gamma, beta);
    EXPECT_NEAR(y.at({0, 0}), -1.2247, 1e-4);
    EXPECT_NEAR(y.at({0, 1}), 0.0, 1e-9);
    EXPECT_NEAR(y.at({0, 2}), 1.2247, 1e-4);
}

TEST(Resample, GlobalAvgPoolIsArithmeticMean) {
    Td x = Td::from({1, 1, 2, 2}, {1, 3, 5, 7});
    EXPECT_DOUBLE_EQ(global_avg_pool(x).value(), 4.0);
}

TEST(Resample, BilinearUpOfConstantIsConstant) {
    Td x = Td::full({1, 2, 3, 3}, 2.5);
    Td y = bilinear_up(x, 2);
    ASSERT_EQ(y.shape(), (Shape{1, 2, 6, 6}));
    for (double v : y.values()) ASSERT_DOUBLE_EQ(v, 2.5);
}

TEST(Resample, BilinearUp2x2MatchesHalfPixelFormulaOracle) {
    Td x = Td::from({1, 1, 2, 2}, {1, 3, 5, 7});
    Td y = bilinear_up(x, 2);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
    // Independent per-pixel oracle: src = (o + 0.5) * in/out - 0.5, clamped,
    // then separable linear interpolation.
    const double in[2][2] = {{1, 3}, {5, 7}};
    for (int oy = 0; oy < 4; ++oy) {
        for (int ox = 0; ox < 4; ++ox) {
            auto axis = [](int o) {
                double s = (o + 0.5) * 0.5 - 0.5;
                s = std::min(std::max(s, 0.0), 1.0);
                const int lo = static_cast<int>(std::floor(s));
                const int hi = std::min(lo + 1, 1);
                return std::tuple<int, int, double>(lo, hi, s - lo);
            };
            auto [y0, y1, fy] = axis(oy);
            auto [x0, x1, fx] = axis(ox);
            const double top = in[y0][x0] + fx * (in[y0][x1] - in[y0][x0]);
            const double bot = in[y1][x0] + fx * (in[y1][x1] - in[y1][x0]);
            const double want = top + fy * (bot - top);
            ASSERT_NEAR(y.at({0, 0, oy, ox}), want, 1e-12) << oy << "," << ox;
        }
    }
}

TEST(Resample, DownsampleRampStaysAffine) {
    // Bilinear reproduces affine functions up to interpolation error.
    const int S = 352, T = 56;
    std::vector<double> img(static_cast<size_t>(S) * S);
    for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) img[static_cast<size_t>(y) * S + x] = x / (S - 1.0);
    }
    Td t = Td::from({1, 1, S, S}, std::move(img));
    Td small = bilinear_resize(t, T, T);
    for (int y = 0; y < T; ++y) {
        for (int x = 0; x < T; ++x) {
            const double sx = std::min(std::max((x + 0.5) * S / T - 0.5, 0.0), S - 1.0);
            ASSERT_NEAR(small.at({0, 0, y, x}), sx / (S - 1.0), 1e-6);
        }
    }
}

TEST(Resample, PoolingWithEdgePadOnOddSizes) {
    // 3x3 input pooled by 2: the pad replicates the last row/column.
    Td x = Td::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Td y = avg_pool(x, 2);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
    EXPECT_DOUBLE_EQ(y.at({0, 0, 0, 0}), (1 + 2 + 4 + 5) / 4.0);
    EXPECT_DOUBLE_EQ(y.at({0, 0, 0, 1}), (3 + 3 + 6 + 6) / 4.0);
    EXPECT_DOUBLE_EQ(y.at({0, 0, 1, 1}), (9 + 9 + 9 + 9) / 4.0);
}

TEST(Resample, MaxPoolPicksWindowMaximum) {
    Td x = Td::from({1, 1, 2, 4}, {1, 5, 2, 0, 3, 4, 8, 7});
    Td y = max_pool(x, 2);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 2}));
    EXPECT_DOUBLE_EQ(y.at({0, 0, 0, 0}), 5.0);
    EXPECT_DOUBLE_EQ(y.at({0, 0, 0, 1}), 8.0);
}

TEST(Resample, InvalidFactorRejected) {
    Td x = Td::zeros({1, 1, 4, 4});
    EXPECT_THROW(bilinear_up(x, 0), ValueError);
    EXPECT_THROW(avg_pool(x, 0), ValueError);
}

TEST(Resample, RollWrapsCyclically) {
    Td x = Td::from({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
    Td y = roll2d(x, 1, 1);
    EXPECT_DOUBLE_EQ(y.at({0, 0, 0, 0}), 6.0);
    EXPECT_DOUBLE_EQ(y.at({0, 0, 1, 1}), 1.0);
    Td back = roll2d(y, -1, -1);
    for (int64_t i = 0; i < x.size(); ++i) ASSERT_DOUBLE_EQ(back.values()[i], x.values()[i]);
}

TEST(Resample, PadEdgeThenCropIsIdentity) {
    Rng rng(5);
    Td x = random_tensor(rng, {1, 2, 3, 4});
    Td y = crop2d(pad_edge2d(x, 2, 1), 3, 4);
    for (int64_t i = 0; i < x.size(); ++i) ASSERT_DOUBLE_EQ(y.values()[i], x.values()[i]);
}
