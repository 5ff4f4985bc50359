#include <gtest/gtest.h>

#include <cmath>

#include "easter/error.hpp"
#include "easter/grad_check.hpp"
#include "easter/numerics.hpp"
#include "support.hpp"

using namespace easter;
using easter::testing::max_abs_diff;
using easter::testing::naive_conv1d;
using easter::testing::grad_ok;
using easter::testing::kGradStep;
using easter::testing::random_tensor;

TEST(Conv1d, OutputLengthIsCeilOfWidthOverStride) {
    EXPECT_EQ(conv1d_output_length(128, 2), 64u);
    EXPECT_EQ(conv1d_output_length(129, 2), 65u);
    EXPECT_EQ(conv1d_output_length(7, 1), 7u);
    EXPECT_EQ(conv1d_output_length(1, 2), 1u);
}

TEST(Conv1d, SamePaddingSplitsLeftFirstFloor) {
    EXPECT_EQ(conv1d_left_pad(10, 3, 1, 1), 1u);
    EXPECT_EQ(conv1d_left_pad(10, 11, 1, 2), 10u);
    EXPECT_EQ(conv1d_left_pad(8, 3, 2, 1), 0u);
    EXPECT_EQ(conv1d_left_pad(9, 3, 2, 1), 1u);
}

TEST(Conv1d, IdentityKernelReturnsInput) {
    Rng rng(1);
    Tensor x = random_tensor({2, 5, 3}, rng);
    Tensor w({1, 3, 3});
    for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0f;
    EXPECT_EQ(conv1d(x, w, Tensor({3}), 1, 1), x);
}

TEST(Conv1d, MatchesDirectLoopAcrossStridesAndDilations) {
    Rng rng(2);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t T = static_cast<std::size_t>(rng.uniform_int(1, 17));
        const std::size_t K = static_cast<std::size_t>(rng.uniform_int(1, 5));
        const int stride = static_cast<int>(rng.uniform_int(1, 3));
        const int dilation = static_cast<int>(rng.uniform_int(1, 3));
        Tensor x = random_tensor({2, T, 3}, rng);
        Tensor w = random_tensor({K, 3, 4}, rng);
        Tensor b = random_tensor({4}, rng);
        EXPECT_LT(max_abs_diff(conv1d(x, w, b, stride, dilation), naive_conv1d(x, w, b, stride, dilation)), 1e-5)
            << "T=" << T << " K=" << K << " s=" << stride << " d=" << dilation;
    }
}

TEST(Conv1d, RejectsChannelMismatch) {
    EXPECT_THROW(conv1d(Tensor({1, 4, 3}), Tensor({3, 2, 4}), Tensor({4}), 1, 1), ContractViolation);
}

TEST(Conv1d, VjpPassesFiniteDifferences) {
    Rng rng(3);
    for (int stride : {1, 2}) {
        for (int dilation : {1, 2}) {
            Tensor x = random_tensor({2, 7, 3}, rng);
            Tensor w = random_tensor({3, 3, 4}, rng, 0.5);
            Tensor b = random_tensor({4}, rng);
            auto fwd_x = [&](const Tensor& in) { return conv1d(in, w, b, stride, dilation); };
            auto vjp_x = [&](const Tensor& in, const Tensor& u) {
                Conv1dContext ctx;
                conv1d(in, w, b, stride, dilation, &ctx);
                return conv1d_vjp(ctx, w, u).input;
            };
            EXPECT_TRUE(grad_ok(grad_check(fwd_x, vjp_x, x, kGradStep)));

            auto fwd_w = [&](const Tensor& ww) { return conv1d(x, ww, b, stride, dilation); };
            auto vjp_w = [&](const Tensor& ww, const Tensor& u) {
                Conv1dContext ctx;
                conv1d(x, ww, b, stride, dilation, &ctx);
                return conv1d_vjp(ctx, ww, u).weight;
            };
            EXPECT_TRUE(grad_ok(grad_check(fwd_w, vjp_w, w, kGradStep)));

            auto fwd_b = [&](const Tensor& bb) { return conv1d(x, w, bb, stride, dilation); };
            auto vjp_b = [&](const Tensor& bb, const Tensor& u) {
                Conv1dContext ctx;
                conv1d(x, w, bb, stride, dilation, &ctx);
                return conv1d_vjp(ctx, w, u).bias;
            };
            EXPECT_TRUE(grad_ok(grad_check(fwd_b, vjp_b, b, kGradStep)));
        }
    }
}

TEST(BatchNorm, TrainModeNormalizesEachChannel) {
    Rng rng(4);
    Tensor x = random_tensor({3, 5, 2}, rng, 3.0);
    for (std::size_t i = 0; i < x.size(); i += 2) x[i] += 10.0f;
    BatchNormState st = BatchNormState::identity(2);
    Tensor y = batch_norm(x, Tensor({2}, 1.0f), Tensor({2}), st, Mode::train);
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0, sq = 0;
        for (std::size_t i = c; i < y.size(); i += 2) mean += y[i];
        mean /= 15.0;
        for (std::size_t i = c; i < y.size(); i += 2) sq += (y[i] - mean) * (y[i] - mean);
        EXPECT_NEAR(mean, 0.0, 1e-5);
        EXPECT_NEAR(sq / 15.0, 1.0, 1e-2);  // epsilon keeps it slightly under 1
    }
}

TEST(BatchNorm, RunningStatsUseMomentumAndBiasedVariance) {
    Tensor x({1, 4, 1}, std::vector<float>{1, 2, 3, 4});
    BatchNormState st = BatchNormState::identity(1);
    batch_norm(x, Tensor({1}, 1.0f), Tensor({1}), st, Mode::train);
    EXPECT_NEAR(st.running_mean[0], 0.9 * 0.0 + 0.1 * 2.5, 1e-6);
    EXPECT_NEAR(st.running_var[0], 0.9 * 1.0 + 0.1 * 1.25, 1e-6);
}

TEST(BatchNorm, InferModeUsesRunningStatsOnly) {
    BatchNormState st = BatchNormState::identity(1);
    st.running_mean[0] = 2.0f;
    st.running_var[0] = 4.0f;
    Tensor y = batch_norm(Tensor({1, 1, 1}, 4.0f), Tensor({1}, 1.0f), Tensor({1}), st, Mode::infer);
    EXPECT_NEAR(y[0], 2.0 / std::sqrt(4.0 + 1e-3), 1e-6);
    EXPECT_FLOAT_EQ(st.running_mean[0], 2.0f);
}

TEST(BatchNorm, SingleValueBatchInTrainModeIsRejected) {
    BatchNormState st = BatchNormState::identity(1);
    EXPECT_THROW(batch_norm(Tensor({1, 1, 1}), Tensor({1}, 1.0f), Tensor({1}), st, Mode::train), ContractViolation);
}

TEST(BatchNorm, VjpPassesFiniteDifferencesInBothModes) {
    Rng rng(5);
    Tensor x = random_tensor({2, 4, 3}, rng);
    Tensor gamma = random_tensor({3}, rng);
    Tensor beta = random_tensor({3}, rng);
    for (Mode mode : {Mode::train, Mode::infer}) {
        BatchNormState base = BatchNormState::identity(3);
        base.running_mean = random_tensor({3}, rng, 0.3);
        auto fwd = [&](const Tensor& in) {
            BatchNormState st = base;
            return batch_norm(in, gamma, beta, st, mode);
        };
        auto vjp = [&](const Tensor& in, const Tensor& u) {
            BatchNormState st = base;
            NormContext ctx;
            batch_norm(in, gamma, beta, st, mode, &ctx);
            return batch_norm_vjp(ctx, gamma, u).input;
        };
        EXPECT_TRUE(grad_ok(grad_check(fwd, vjp, x, kGradStep)));
        auto fwd_g = [&](const Tensor& g) {
            BatchNormState st = base;
            return batch_norm(x, g, beta, st, mode);
        };
        auto vjp_g = [&](const Tensor& g, const Tensor& u) {
            BatchNormState st = base;
            NormContext ctx;
            batch_norm(x, g, beta, st, mode, &ctx);
            return batch_norm_vjp(ctx, g, u).gamma;
        };
        EXPECT_TRUE(grad_ok(grad_check(fwd_g, vjp_g, gamma, kGradStep)));
    }
}

TEST(LayerNorm, NormalizesEachFrame) {
    Rng rng(6);
    Tensor x = random_tensor({2, 3, 8}, rng, 4.0);
    Tensor y = layer_norm(x, Tensor({8}, 1.0f), Tensor({8}));
    for (std::size_t f = 0; f < 6; ++f) {
        double mean = 0;
        for (std::size_t c = 0; c < 8; ++c) mean += y[f * 8 + c];
        EXPECT_NEAR(mean / 8, 0.0, 1e-5);
    }
}

TEST(LayerNorm, VjpPassesFiniteDifferences) {
    Rng rng(7);
    Tensor x = random_tensor({2, 3, 5}, rng);
    Tensor gamma = random_tensor({5}, rng);
    Tensor beta = random_tensor({5}, rng);
    auto fwd = [&](const Tensor& in) { return layer_norm(in, gamma, beta); };
    auto vjp = [&](const Tensor& in, const Tensor& u) {
        NormContext ctx;
        layer_norm(in, gamma, beta, &ctx);
        return layer_norm_vjp(ctx, gamma, u).input;
    };
    EXPECT_TRUE(grad_ok(grad_check(fwd, vjp, x, kGradStep)));
    auto fwd_b = [&](const Tensor& b) { return layer_norm(x, gamma, b); };
    auto vjp_b = [&](const Tensor& b, const Tensor& u) {
        NormContext ctx;
        layer_norm(x, gamma, b, &ctx);
        return layer_norm_vjp(ctx, gamma, u).beta;
    };
    EXPECT_TRUE(grad_ok(grad_check(fwd_b, vjp_b, beta, kGradStep)));
}

TEST(Activation, ReluAndSigmoidValues) {
    Tensor x({4}, std::vector<float>{-2, 0, 0.5f, 3});
    EXPECT_EQ(activation(Activation::relu, x), Tensor({4}, std::vector<float>{0, 0, 0.5f, 3}));
    Tensor s = activation(Activation::sigmoid, x);
    EXPECT_NEAR(s[1], 0.5, 1e-7);
    EXPECT_NEAR(s[3], 1.0 / (1.0 + std::exp(-3.0)), 1e-6);
}

TEST(Activation, VjpsPassFiniteDifferences) {
    Rng rng(8);
    Tensor x = random_tensor({3, 4, 2}, rng);
    // Keep relu inputs away from the kink.
    for (auto& v : x.data()) {
        if (std::fabs(v) < 0.05f) v = 0.3f;
    }
    for (Activation kind : {Activation::relu, Activation::sigmoid}) {
        auto fwd = [&](const Tensor& in) { return activation(kind, in); };
        auto vjp = [&](const Tensor& in, const Tensor& u) {
            ActivationContext ctx;
            activation(kind, in, &ctx);
            return activation_vjp(ctx, u);
        };
        EXPECT_TRUE(grad_ok(grad_check(fwd, vjp, x, kGradStep)));
    }
}

TEST(LogSoftmax, RowsExponentiateToOneAndShiftInvariant) {
    Rng rng(9);
    Tensor x = random_tensor({3, 5}, rng, 5.0);
    Tensor y = log_softmax(x);
    Tensor shifted = x;
    for (std::size_t i = 0; i < 5; ++i) shifted[i] += 100.0f;
    Tensor ys = log_softmax(shifted);
    for (std::size_t r = 0; r < 3; ++r) {
        double total = 0;
        for (std::size_t c = 0; c < 5; ++c) total += std::exp(double(y[r * 5 + c]));
        EXPECT_NEAR(total, 1.0, 1e-6);
    }
    for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(y[c], ys[c], 1e-4);
}

TEST(LogSoftmax, VjpPassesFiniteDifferences) {
    Rng rng(10);
    Tensor x = random_tensor({2, 3, 4}, rng);
    auto vjp = [](const Tensor& in, const Tensor& u) { return log_softmax_vjp(log_softmax(in), u); };
    EXPECT_TRUE(grad_ok(grad_check(log_softmax, vjp, x, kGradStep)));
}

TEST(FullyConnected, SmallAffineMap) {
    Tensor x({1, 2}, std::vector<float>{1, 2});
    Tensor w({2, 3}, std::vector<float>{1, 0, 2, 0, 1, -1});
    Tensor b({3}, std::vector<float>{0.5f, 0, 0});
    EXPECT_EQ(fully_connected(x, w, b), Tensor({1, 3}, std::vector<float>{1.5f, 2, 0}));
}

TEST(FullyConnected, VjpPassesFiniteDifferences) {
    Rng rng(11);
    Tensor x = random_tensor({2, 3, 4}, rng);
    Tensor w = random_tensor({4, 5}, rng);
    Tensor b = random_tensor({5}, rng);
    auto fwd = [&](const Tensor& in) { return fully_connected(in, w, b); };
    auto vjp = [&](const Tensor& in, const Tensor& u) {
        FullyConnectedContext ctx;
        fully_connected(in, w, b, &ctx);
        return fully_connected_vjp(ctx, w, u).input;
    };
    EXPECT_TRUE(grad_ok(grad_check(fwd, vjp, x, kGradStep)));
    auto fwd_w = [&](const Tensor& ww) { return fully_connected(x, ww, b); };
    auto vjp_w = [&](const Tensor& ww, const Tensor& u) {
        FullyConnectedContext ctx;
        fully_connected(x, ww, b, &ctx);
        return fully_connected_vjp(ctx, ww, u).weight;
    };
    EXPECT_TRUE(grad_ok(grad_check(fwd_w, vjp_w, w, kGradStep)));
}

TEST(Pooling, AveragesOnlyValidFrames) {
    Tensor x({2, 3, 1}, std::vector<float>{1, 2, 3, 4, 100, 100});
    Tensor y = global_average_pool(x, {3, 1});
    EXPECT_FLOAT_EQ(y[0], 2.0f);
    EXPECT_FLOAT_EQ(y[1], 4.0f);
}

TEST(Pooling, VjpPassesFiniteDifferences) {
    Rng rng(12);
    Tensor x = random_tensor({2, 5, 3}, rng);
    const Lengths lengths{5, 2};
    auto fwd = [&](const Tensor& in) { return global_average_pool(in, lengths); };
    auto vjp = [&](const Tensor&, const Tensor& u) { return global_average_pool_vjp(lengths, 5, u); };
    EXPECT_TRUE(grad_ok(grad_check(fwd, vjp, x, kGradStep)));
}

TEST(Masking, ZeroesFramesPastLength) {
    Tensor x({1, 3, 2}, 1.0f);
    Tensor y = mask_frames(x, {2});
    EXPECT_EQ(y, Tensor({1, 3, 2}, std::vector<float>{1, 1, 1, 1, 0, 0}));
}

TEST(Dropout, InferModeAndZeroRateAreIdentity) {
    Rng rng(13);
    Tensor x = random_tensor({2, 4, 3}, rng);
    Rng r1(1);
    EXPECT_EQ(dropout(x, 0.5f, Mode::infer, r1), x);
    EXPECT_EQ(dropout(x, 0.0f, Mode::train, r1), x);
}

TEST(Dropout, RateOneIsAConfigError) {
    Rng rng(1);
    EXPECT_THROW(dropout(Tensor({2}), 1.0f, Mode::train, rng), ConfigError);
}

TEST(Dropout, KeepsExpectationAndVjpReusesMask) {
    Tensor x({20000}, 1.0f);
    Rng rng(14);
    DropoutContext ctx;
    Tensor y = dropout(x, 0.3f, Mode::train, rng, &ctx);
    double mean = 0;
    for (auto v : y.data()) mean += v;
    EXPECT_NEAR(mean / 20000.0, 1.0, 0.03);
    Tensor g = dropout_vjp(ctx, Tensor({20000}, 1.0f));
    EXPECT_EQ(g, y);
}
