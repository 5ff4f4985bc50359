#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "easter/image.hpp"
#include "easter/rng.hpp"
#include "easter/tensor.hpp"

namespace easter::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<float>(rng.normal() * scale);
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(double(a[i]) - double(b[i])));
    return worst;
}

/// Direct-loop 1D convolution with symmetric-as-possible zero padding.
inline Tensor naive_conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int dilation) {
    const std::size_t B = x.dim(0), T = x.dim(1), Ci = x.dim(2);
    const std::size_t K = w.dim(0), Co = w.dim(2);
    const std::size_t out_t = (T + stride - 1) / stride;
    const long need = long(out_t - 1) * stride + long(K - 1) * dilation + 1 - long(T);
    const long left = std::max(0L, need) / 2;
    Tensor y({B, out_t, Co});
    for (std::size_t bb = 0; bb < B; ++bb)
        for (std::size_t t = 0; t < out_t; ++t)
            for (std::size_t o = 0; o < Co; ++o) {
                double acc = b[o];
                for (std::size_t k = 0; k < K; ++k) {
                    const long src = long(t) * stride + long(k) * dilation - left;
                    if (src < 0 || src >= long(T)) continue;
                    for (std::size_t c = 0; c < Ci; ++c) {
                        acc += double(x[(bb * T + src) * Ci + c]) * w[(k * Ci + c) * Co + o];
                    }
                }
                y[(bb * out_t + t) * Co + o] = float(acc);
            }
    return y;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("easter_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline GrayImage random_image(std::size_t h, std::size_t w, Rng& rng) {
    GrayImage img(h, w);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

}  // namespace easter::testing

#include <gtest/gtest.h>

#include "easter/grad_check.hpp"

namespace easter::testing {

inline constexpr double kGradStep = 2e-3;
inline constexpr double kGradTol = 1e-2;
/// Whole-network sweeps: round-off through many layers dominates below this.
inline constexpr double kModelGradStep = 4e-3;
/// At most this share of elements may be excluded as kinks.
inline constexpr double kMaxSkipped = 0.3;

inline ::testing::AssertionResult grad_ok(const GradCheckResult& r) {
    if (r.checked == 0) return ::testing::AssertionFailure() << "no smooth element was checked";
    if (r.skipped_fraction() > kMaxSkipped) {
        return ::testing::AssertionFailure() << "skipped " << r.skipped << " of " << r.checked + r.skipped;
    }
    if (r.max_relative_error >= kGradTol) {
        return ::testing::AssertionFailure() << "relative error " << r.max_relative_error << " at " << r.worst_index
                                             << " (analytic " << r.analytic << ", numeric " << r.numeric << ")";
    }
    return ::testing::AssertionSuccess();
}

}  // namespace easter::testing

#include "easter/model_config.hpp"

namespace easter::testing {

/// Small network touching every block type, dense residuals and SE.
inline ModelConfig tiny_config(int height = 8, int vocab = 5, int channels = 8, NormKind norm = NormKind::batch) {
    ModelConfig c;
    c.input_height = height;
    c.vocab_size = vocab;
    c.normalization = norm;
    c.seed = 3;
    BlockSpec a;
    a.type = BlockType::A;
    a.out_channels = channels;
    a.kernel = 3;
    a.stride = 2;
    a.dropout = 0.1f;
    BlockSpec b;
    b.type = BlockType::B;
    b.conv_layers = 2;
    b.out_channels = channels;
    b.kernel = 3;
    b.dropout = 0.1f;
    b.residual = ResidualMode::dense;
    b.se = true;
    BlockSpec b2 = b;
    b2.kernel = 5;
    BlockSpec d = a;
    d.stride = 1;
    d.dilation = 2;
    BlockSpec head;
    head.type = BlockType::C;
    head.out_channels = vocab;
    c.blocks = {a, a, b, b2, d, head};
    return c;
}

}  // namespace easter::testing
