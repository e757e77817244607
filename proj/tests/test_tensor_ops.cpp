#include <gtest/gtest.h>

#include "sodboost/ops.hpp"
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

TEST(TensorOps, SigmoidAtZeroIsHalf) {
    Td x = Td::scalar(0.0);
    EXPECT_DOUBLE_EQ(sigmoid(x).value(), 0.5);
}

TEST(TensorOps, InvertIsOneMinus) {
    Td p = Td::scalar(0.3);
    EXPECT_DOUBLE_EQ(one_minus(p).value(), 0.7);
}

TEST(TensorOps, LogOfClampedTinyValue) {
    Td p = Td::scalar(1e-12);
    const double got = log(clamp(p, 1e-7, 1.0 - 1e-7)).value();
    EXPECT_NEAR(got, std::log(1e-7), 1e-12);
    EXPECT_NEAR(got, -16.1181, 5e-5);
}

TEST(TensorOps, BroadcastMismatchReportsBothShapes) {
    Td a = Td::zeros({2, 3});
    Td b = Td::zeros({4, 3});
    try {
        add(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(2,3)"), std::string::npos) << msg;
        EXPECT_NE(msg.find("(4,3)"), std::string::npos) << msg;
    }
}

TEST(TensorOps, BroadcastForwardEqualsExplicitTiling) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Td a = random_tensor(rng, {2, 3, 4});
        Td b = random_tensor(rng, {3, 1});
        Td direct = mul(a, b);
        Td tiled = mul(a, broadcast_to(b, Shape{2, 3, 4}));
        ASSERT_EQ(direct.shape(), tiled.shape());
        for (int64_t i = 0; i < direct.size(); ++i) {
            ASSERT_DOUBLE_EQ(direct.values()[i], tiled.values()[i]);
        }
    }
}

TEST(TensorOps, BroadcastShapeRuleIsAssociative) {
    // The result shape of chained broadcasts does not depend on grouping.
    Rng rng(5);
    Td a = random_tensor(rng, {2, 1, 4});
    Td b = random_tensor(rng, {3, 1});
    Td c = random_tensor(rng, {1, 3, 4});
    Td left = add(add(a, b), c);
    Td right = add(a, add(b, c));
    ASSERT_EQ(left.shape(), right.shape());
    for (int64_t i = 0; i < left.size(); ++i) {
        ASSERT_NEAR(left.values()[i], right.values()[i], 1e-15);
    }
}

TEST(TensorOps, ConcatAddsChannelDims) {
    Td a = Td::zeros({1, 2, 4, 4});
    Td b = Td::zeros({1, 3, 4, 4});
    Td c = concat<double>({a, b}, 1);
    EXPECT_EQ(c.shape(), (Shape{1, 5, 4, 4}));
}

TEST(TensorOps, ConcatRejectsIncompatibleShapes) {
    Td a = Td::zeros({1, 2, 4, 4});
    Td b = Td::zeros({1, 3, 5, 4});
    EXPECT_THROW(concat<double>({a, b}, 1), ShapeError);
}

TEST(TensorOps, ConcatValuesLayout) {
    Td a = Td::from({1, 1, 2, 2}, {1, 2, 3, 4});
    Td b = Td::from({1, 2, 2, 2}, {5, 6, 7, 8, 9, 10, 11, 12});
    Td c = concat<double>({a, b}, 1);
    EXPECT_DOUBLE_EQ(c.at({0, 0, 1, 1}), 4);
    EXPECT_DOUBLE_EQ(c.at({0, 1, 0, 0}), 5);
    EXPECT_DOUBLE_EQ(c.at({0, 2, 1, 0}), 11);
}

TEST(TensorOps, TransposeRoundTrip) {
    Rng rng(3);
    Td x = random_tensor(rng, {2, 3, 4, 5});
    Td t = transpose(x, {3, 1, 0, 2});
    EXPECT_EQ(t.shape(), (Shape{5, 3, 2, 4}));
    Td back = transpose(t, {2, 1, 3, 0});
    ASSERT_EQ(back.shape(), x.shape());
    for (int64_t i = 0; i < x.size(); ++i) {
        ASSERT_DOUBLE_EQ(back.values()[i], x.values()[i]);
    }
}

TEST(TensorOps, MatmulMatchesTripleLoopOracle) {
    Rng rng(17);
    const int B = 2, M = 3, K = 4, N = 5;
    Td a = random_tensor(rng, {B, M, K});
    Td b = random_tensor(rng, {B, K, N});
    Td c = matmul(a, b);
    for (int i = 0; i < B; ++i) {
        for (int m = 0; m < M; ++m) {
            for (int n = 0; n < N; ++n) {
                double acc = 0;
                for (int k = 0; k < K; ++k) acc += a.at({i, m, k}) * b.at({i, k, n});
                ASSERT_NEAR(c.at({i, m, n}), acc, 1e-12);
            }
        }
    }
}

TEST(TensorOps, SoftmaxRowsSumToOne) {
    Rng rng(23);
    Td x = random_tensor(rng, {4, 7}, -5.0, 5.0);
    Td y = softmax(x);
    for (int r = 0; r < 4; ++r) {
        double s = 0;
        for (int c = 0; c < 7; ++c) s += y.at({r, c});
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(TensorOps, SumAndMean) {
    Td x = Td::from({2, 2}, {1, 2, 3, 4});
    EXPECT_DOUBLE_EQ(sum(x).value(), 10.0);
    EXPECT_DOUBLE_EQ(mean(x).value(), 2.5);
}

TEST(TensorOps, SumBranchesIsPermutationInvariantBitwise) {
    Rng rng(29);
    std::vector<Td> branches;
    for (int i = 0; i < 4; ++i) branches.push_back(random_tensor(rng, {1, 1, 5, 5}, -3, 3));
    Td base = sum_branches(branches);
    std::vector<Td> perm = {branches[2], branches[0], branches[3], branches[1]};
    Td shuffled = sum_branches(perm);
    for (int64_t i = 0; i < base.size(); ++i) {
        ASSERT_EQ(base.values()[i], shuffled.values()[i]);
    }
}

TEST(TensorOps, ClampForwardBounds) {
    Td x = Td::from({4}, {-2.0, 0.25, 0.75, 3.0});
    Td y = clamp(x, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(y.values()[0], 0.0);
    EXPECT_DOUBLE_EQ(y.values()[1], 0.25);
    EXPECT_DOUBLE_EQ(y.values()[2], 0.75);
    EXPECT_DOUBLE_EQ(y.values()[3], 1.0);
}

TEST(TensorOps, ReshapeRejectsWrongCount) {
    EXPECT_THROW(reshape(Td::zeros({2, 3}), Shape{4, 2}), ShapeError);
}
