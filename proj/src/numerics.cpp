#include "easter/numerics.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "easter/error.hpp"

namespace easter {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        contract_fail(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                      shape_string(t.shape()));
    }
}

void require_vector(const Tensor& t, std::size_t n, const char* what) {
    if (t.rank() != 1 || t.dim(0) != n) {
        contract_fail(std::string(what) + ": expected [" + std::to_string(n) + "], got " + shape_string(t.shape()));
    }
}

struct ConvGeometry {
    std::size_t batch, length, in_ch, kernel, out_ch, out_len, left_pad;
    int stride, dilation;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, int stride, int dilation) {
    require_rank(input, 3, "conv1d input");
    require_rank(weight, 3, "conv1d weight");
    if (stride < 1 || dilation < 1) contract_fail("conv1d: stride and dilation must be positive");
    if (weight.dim(0) < 1) contract_fail("conv1d: kernel size must be at least 1");
    if (input.dim(1) == 0) contract_fail("conv1d: empty sequence");
    if (input.dim(2) != weight.dim(1)) {
        contract_fail("conv1d: input channels " + std::to_string(input.dim(2)) + " != weight Cin " +
                      std::to_string(weight.dim(1)));
    }
    ConvGeometry g{};
    g.batch = input.dim(0);
    g.length = input.dim(1);
    g.in_ch = input.dim(2);
    g.kernel = weight.dim(0);
    g.out_ch = weight.dim(2);
    g.stride = stride;
    g.dilation = dilation;
    g.out_len = conv1d_output_length(g.length, stride);
    g.left_pad = conv1d_left_pad(g.length, g.kernel, stride, dilation);
    return g;
}

// Gathers [B*T', K*Cin] patches; out-of-range taps are zero.
RowMatrix im2col(const Tensor& input, const ConvGeometry& g) {
    RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(g.batch * g.out_len),
                                     static_cast<Eigen::Index>(g.kernel * g.in_ch));
    const float* x = input.raw();
    for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t t = 0; t < g.out_len; ++t) {
            float* row = cols.data() + (b * g.out_len + t) * g.kernel * g.in_ch;
            for (std::size_t k = 0; k < g.kernel; ++k) {
                const auto src = static_cast<std::ptrdiff_t>(t * g.stride + k * g.dilation) -
                                 static_cast<std::ptrdiff_t>(g.left_pad);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(g.length)) continue;
                const float* frame = x + (b * g.length + static_cast<std::size_t>(src)) * g.in_ch;
                std::copy(frame, frame + g.in_ch, row + k * g.in_ch);
            }
        }
    }
    return cols;
}

}  // namespace

// ---------------------------------------------------------------------------
// conv1d

std::size_t conv1d_output_length(std::size_t length, int stride) {
    const auto s = static_cast<std::size_t>(stride);
    return (length + s - 1) / s;
}

std::size_t conv1d_left_pad(std::size_t length, std::size_t kernel, int stride, int dilation) {
    const auto out_len = static_cast<std::ptrdiff_t>(conv1d_output_length(length, stride));
    const auto extent = static_cast<std::ptrdiff_t>((kernel - 1) * static_cast<std::size_t>(dilation) + 1);
    const auto total = (out_len - 1) * stride + extent - static_cast<std::ptrdiff_t>(length);
    return total > 0 ? static_cast<std::size_t>(total / 2) : 0;
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int dilation,
              Conv1dContext* ctx) {
    const ConvGeometry g = conv_geometry(input, weight, stride, dilation);
    require_vector(bias, g.out_ch, "conv1d bias");

    const RowMatrix cols = im2col(input, g);
    Tensor out({g.batch, g.out_len, g.out_ch});
    MatrixMap y(out.raw(), static_cast<Eigen::Index>(g.batch * g.out_len), static_cast<Eigen::Index>(g.out_ch));
    ConstMatrixMap w(weight.raw(), static_cast<Eigen::Index>(g.kernel * g.in_ch), static_cast<Eigen::Index>(g.out_ch));
    y.noalias() = cols * w;
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.raw(), static_cast<Eigen::Index>(g.out_ch));

    if (ctx) {
        ctx->input = input;
        ctx->stride = stride;
        ctx->dilation = dilation;
    }
    EASTER_CHECK_FINITE(out, "conv1d");
    return out;
}

Conv1dGrads conv1d_vjp(const Conv1dContext& ctx, const Tensor& weight, const Tensor& upstream) {
    const ConvGeometry g = conv_geometry(ctx.input, weight, ctx.stride, ctx.dilation);
    if (upstream.shape() != Shape{g.batch, g.out_len, g.out_ch}) {
        contract_fail("conv1d_vjp: upstream " + shape_string(upstream.shape()) + " does not match forward output [" +
                      std::to_string(g.batch) + "," + std::to_string(g.out_len) + "," + std::to_string(g.out_ch) +
                      "]");
    }
    const auto rows = static_cast<Eigen::Index>(g.batch * g.out_len);
    const auto patch = static_cast<Eigen::Index>(g.kernel * g.in_ch);
    const auto cout = static_cast<Eigen::Index>(g.out_ch);

    const RowMatrix cols = im2col(ctx.input, g);
    ConstMatrixMap dy(upstream.raw(), rows, cout);
    ConstMatrixMap w(weight.raw(), patch, cout);

    Conv1dGrads grads;
    grads.weight = Tensor(weight.shape());
    MatrixMap dw(grads.weight.raw(), patch, cout);
    dw.noalias() = cols.transpose() * dy;

    grads.bias = Tensor({g.out_ch});
    Eigen::Map<Eigen::RowVectorXf>(grads.bias.raw(), cout) = dy.colwise().sum();

    const RowMatrix dcols = dy * w.transpose();
    grads.input = Tensor(ctx.input.shape());
    float* dx = grads.input.raw();
    for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t t = 0; t < g.out_len; ++t) {
            const float* row = dcols.data() + (b * g.out_len + t) * g.kernel * g.in_ch;
            for (std::size_t k = 0; k < g.kernel; ++k) {
                const auto src = static_cast<std::ptrdiff_t>(t * g.stride + k * g.dilation) -
                                 static_cast<std::ptrdiff_t>(g.left_pad);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(g.length)) continue;
                float* frame = dx + (b * g.length + static_cast<std::size_t>(src)) * g.in_ch;
                const float* part = row + k * g.in_ch;
                for (std::size_t c = 0; c < g.in_ch; ++c) frame[c] += part[c];
            }
        }
    }
    EASTER_CHECK_FINITE(grads.input, "conv1d_vjp");
    return grads;
}

// ---------------------------------------------------------------------------
// batch norm

BatchNormState BatchNormState::identity(std::size_t channels) {
    BatchNormState s;
    s.running_mean = Tensor({channels}, 0.0f);
    s.running_var = Tensor({channels}, 1.0f);
    return s;
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormState& state, Mode mode,
                  NormContext* ctx) {
    require_rank(input, 3, "batch_norm input");
    const std::size_t channels = input.dim(2);
    const std::size_t frames = input.dim(0) * input.dim(1);
    require_vector(gamma, channels, "batch_norm gamma");
    require_vector(beta, channels, "batch_norm beta");
    require_vector(state.running_mean, channels, "batch_norm running_mean");
    require_vector(state.running_var, channels, "batch_norm running_var");

    std::vector<float> mean(channels);
    std::vector<float> inv_std(channels);
    if (mode == Mode::train) {
        if (frames < 2) throw ContractViolation("batch_norm: degenerate batch (B*T < 2) in train mode");
        std::vector<double> sum(channels, 0.0);
        std::vector<double> sq(channels, 0.0);
        for (std::size_t i = 0; i < frames; ++i) {
            const float* row = input.raw() + i * channels;
            for (std::size_t c = 0; c < channels; ++c) sum[c] += row[c];
        }
        for (std::size_t c = 0; c < channels; ++c) sum[c] /= static_cast<double>(frames);
        for (std::size_t i = 0; i < frames; ++i) {
            const float* row = input.raw() + i * channels;
            for (std::size_t c = 0; c < channels; ++c) {
                const double d = row[c] - sum[c];
                sq[c] += d * d;
            }
        }
        for (std::size_t c = 0; c < channels; ++c) {
            const double var = sq[c] / static_cast<double>(frames);
            mean[c] = static_cast<float>(sum[c]);
            inv_std[c] = static_cast<float>(1.0 / std::sqrt(var + state.epsilon));
            state.running_mean[c] = (1.0f - state.momentum) * state.running_mean[c] + state.momentum * mean[c];
            state.running_var[c] =
                (1.0f - state.momentum) * state.running_var[c] + state.momentum * static_cast<float>(var);
        }
    } else {
        for (std::size_t c = 0; c < channels; ++c) {
            mean[c] = state.running_mean[c];
            inv_std[c] = 1.0f / std::sqrt(state.running_var[c] + state.epsilon);
        }
    }

    Tensor out(input.shape());
    Tensor normalized(input.shape());
    for (std::size_t i = 0; i < frames; ++i) {
        const float* row = input.raw() + i * channels;
        float* xh = normalized.raw() + i * channels;
        float* y = out.raw() + i * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            xh[c] = (row[c] - mean[c]) * inv_std[c];
            y[c] = gamma[c] * xh[c] + beta[c];
        }
    }
    if (ctx) {
        ctx->normalized = std::move(normalized);
        ctx->inv_std = std::move(inv_std);
        ctx->mode = mode;
    }
    EASTER_CHECK_FINITE(out, "batch_norm");
    return out;
}

NormGrads batch_norm_vjp(const NormContext& ctx, const Tensor& gamma, const Tensor& upstream) {
    require_same_shape(ctx.normalized, upstream, "batch_norm_vjp");
    const std::size_t channels = upstream.dim(2);
    const std::size_t frames = upstream.dim(0) * upstream.dim(1);
    require_vector(gamma, channels, "batch_norm_vjp gamma");

    NormGrads g{Tensor(upstream.shape()), Tensor({channels}), Tensor({channels})};
    std::vector<double> sum_dy(channels, 0.0);
    std::vector<double> sum_dy_xh(channels, 0.0);
    for (std::size_t i = 0; i < frames; ++i) {
        const float* dy = upstream.raw() + i * channels;
        const float* xh = ctx.normalized.raw() + i * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            sum_dy[c] += dy[c];
            sum_dy_xh[c] += static_cast<double>(dy[c]) * xh[c];
        }
    }
    for (std::size_t c = 0; c < channels; ++c) {
        g.beta[c] = static_cast<float>(sum_dy[c]);
        g.gamma[c] = static_cast<float>(sum_dy_xh[c]);
    }
    const auto n = static_cast<double>(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        const float* dy = upstream.raw() + i * channels;
        const float* xh = ctx.normalized.raw() + i * channels;
        float* dx = g.input.raw() + i * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            const double scale = static_cast<double>(gamma[c]) * ctx.inv_std[c];
            if (ctx.mode == Mode::train) {
                dx[c] = static_cast<float>(scale * (dy[c] - sum_dy[c] / n - xh[c] * sum_dy_xh[c] / n));
            } else {
                dx[c] = static_cast<float>(scale * dy[c]);
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// layer norm

Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, NormContext* ctx) {
    if (input.rank() < 1 || input.dim(input.rank() - 1) < 1) contract_fail("layer_norm: need at least one channel");
    const std::size_t channels = input.dim(input.rank() - 1);
    const std::size_t frames = input.size() / channels;
    require_vector(gamma, channels, "layer_norm gamma");
    require_vector(beta, channels, "layer_norm beta");

    Tensor out(input.shape());
    Tensor normalized(input.shape());
    std::vector<float> inv_std(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        const float* row = input.raw() + i * channels;
        double mean = 0.0;
        for (std::size_t c = 0; c < channels; ++c) mean += row[c];
        mean /= static_cast<double>(channels);
        double var = 0.0;
        for (std::size_t c = 0; c < channels; ++c) var += (row[c] - mean) * (row[c] - mean);
        var /= static_cast<double>(channels);
        const double is = 1.0 / std::sqrt(var + kLayerNormEpsilon);
        inv_std[i] = static_cast<float>(is);
        float* xh = normalized.raw() + i * channels;
        float* y = out.raw() + i * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            xh[c] = static_cast<float>((row[c] - mean) * is);
            y[c] = gamma[c] * xh[c] + beta[c];
        }
    }
    if (ctx) {
        ctx->normalized = std::move(normalized);
        ctx->inv_std = std::move(inv_std);
        ctx->mode = Mode::train;
    }
    EASTER_CHECK_FINITE(out, "layer_norm");
    return out;
}

NormGrads layer_norm_vjp(const NormContext& ctx, const Tensor& gamma, const Tensor& upstream) {
    require_same_shape(ctx.normalized, upstream, "layer_norm_vjp");
    const std::size_t channels = upstream.dim(upstream.rank() - 1);
    const std::size_t frames = upstream.size() / channels;
    require_vector(gamma, channels, "layer_norm_vjp gamma");

    NormGrads g{Tensor(upstream.shape()), Tensor({channels}), Tensor({channels})};
    std::vector<double> dgamma(channels, 0.0);
    std::vector<double> dbeta(channels, 0.0);
    const auto n = static_cast<double>(channels);
    for (std::size_t i = 0; i < frames; ++i) {
        const float* dy = upstream.raw() + i * channels;
        const float* xh = ctx.normalized.raw() + i * channels;
        float* dx = g.input.raw() + i * channels;
        double sum_g = 0.0;
        double sum_g_xh = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const double gy = static_cast<double>(dy[c]) * gamma[c];
            sum_g += gy;
            sum_g_xh += gy * xh[c];
            dgamma[c] += static_cast<double>(dy[c]) * xh[c];
            dbeta[c] += dy[c];
        }
        for (std::size_t c = 0; c < channels; ++c) {
            const double gy = static_cast<double>(dy[c]) * gamma[c];
            dx[c] = static_cast<float>(ctx.inv_std[i] * (gy - sum_g / n - xh[c] * sum_g_xh / n));
        }
    }
    for (std::size_t c = 0; c < channels; ++c) {
        g.gamma[c] = static_cast<float>(dgamma[c]);
        g.beta[c] = static_cast<float>(dbeta[c]);
    }
    return g;
}

// ---------------------------------------------------------------------------
// activations

Tensor activation(Activation kind, const Tensor& input, ActivationContext* ctx) {
    Tensor out(input.shape());
    if (kind == Activation::relu) {
        for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0f ? input[i] : 0.0f;
    } else {
        for (std::size_t i = 0; i < input.size(); ++i) out[i] = 1.0f / (1.0f + std::exp(-input[i]));
    }
    if (ctx) {
        ctx->kind = kind;
        ctx->saved = kind == Activation::relu ? input : out;
    }
    return out;
}

Tensor activation_vjp(const ActivationContext& ctx, const Tensor& upstream) {
    require_same_shape(ctx.saved, upstream, "activation_vjp");
    Tensor dx(upstream.shape());
    if (ctx.kind == Activation::relu) {
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = ctx.saved[i] > 0.0f ? upstream[i] : 0.0f;
    } else {
        for (std::size_t i = 0; i < dx.size(); ++i) {
            const float s = ctx.saved[i];
            dx[i] = upstream[i] * s * (1.0f - s);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// log-softmax

Tensor log_softmax(const Tensor& input) {
    if (input.rank() < 1 || input.dim(input.rank() - 1) < 1) contract_fail("log_softmax: empty class axis");
    const std::size_t classes = input.dim(input.rank() - 1);
    const std::size_t rows = input.size() / classes;
    Tensor out(input.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const float* x = input.raw() + r * classes;
        float* y = out.raw() + r * classes;
        const float mx = *std::max_element(x, x + classes);
        double sum = 0.0;
        for (std::size_t v = 0; v < classes; ++v) sum += std::exp(static_cast<double>(x[v]) - mx);
        const double lse = mx + std::log(sum);
        for (std::size_t v = 0; v < classes; ++v) y[v] = static_cast<float>(x[v] - lse);
    }
    EASTER_CHECK_FINITE(out, "log_softmax");
    return out;
}

Tensor log_softmax_vjp(const Tensor& output, const Tensor& upstream) {
    require_same_shape(output, upstream, "log_softmax_vjp");
    const std::size_t classes = output.dim(output.rank() - 1);
    const std::size_t rows = output.size() / classes;
    Tensor dx(output.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const float* y = output.raw() + r * classes;
        const float* dy = upstream.raw() + r * classes;
        double total = 0.0;
        for (std::size_t v = 0; v < classes; ++v) total += dy[v];
        for (std::size_t v = 0; v < classes; ++v) {
            dx[r * classes + v] = static_cast<float>(dy[v] - std::exp(static_cast<double>(y[v])) * total);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// fully connected

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias, FullyConnectedContext* ctx) {
    require_rank(weight, 2, "fully_connected weight");
    if (input.rank() < 1 || input.dim(input.rank() - 1) != weight.dim(0)) {
        contract_fail("fully_connected: input " + shape_string(input.shape()) + " incompatible with weight " +
                      shape_string(weight.shape()));
    }
    const std::size_t din = weight.dim(0);
    const std::size_t dout = weight.dim(1);
    require_vector(bias, dout, "fully_connected bias");
    const std::size_t rows = input.size() / din;

    Shape out_shape = input.shape();
    out_shape.back() = dout;
    Tensor out(out_shape);
    MatrixMap y(out.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dout));
    y.noalias() = ConstMatrixMap(input.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(din)) *
                  ConstMatrixMap(weight.raw(), static_cast<Eigen::Index>(din), static_cast<Eigen::Index>(dout));
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.raw(), static_cast<Eigen::Index>(dout));
    if (ctx) ctx->input = input;
    EASTER_CHECK_FINITE(out, "fully_connected");
    return out;
}

FullyConnectedGrads fully_connected_vjp(const FullyConnectedContext& ctx, const Tensor& weight,
                                        const Tensor& upstream) {
    const std::size_t din = weight.dim(0);
    const std::size_t dout = weight.dim(1);
    Shape expected = ctx.input.shape();
    expected.back() = dout;
    if (upstream.shape() != expected) contract_fail("fully_connected_vjp: upstream shape mismatch");
    const auto rows = static_cast<Eigen::Index>(ctx.input.size() / din);
    const auto i_din = static_cast<Eigen::Index>(din);
    const auto i_dout = static_cast<Eigen::Index>(dout);

    ConstMatrixMap x(ctx.input.raw(), rows, i_din);
    ConstMatrixMap dy(upstream.raw(), rows, i_dout);
    ConstMatrixMap w(weight.raw(), i_din, i_dout);

    FullyConnectedGrads g{Tensor(ctx.input.shape()), Tensor(weight.shape()), Tensor({dout})};
    MatrixMap(g.input.raw(), rows, i_din).noalias() = dy * w.transpose();
    MatrixMap(g.weight.raw(), i_din, i_dout).noalias() = x.transpose() * dy;
    Eigen::Map<Eigen::RowVectorXf>(g.bias.raw(), i_dout) = dy.colwise().sum();
    return g;
}

// ---------------------------------------------------------------------------
// pooling / masking

Tensor global_average_pool(const Tensor& input, const Lengths& lengths) {
    require_rank(input, 3, "global_average_pool input");
    const std::size_t batch = input.dim(0);
    const std::size_t frames = input.dim(1);
    const std::size_t channels = input.dim(2);
    if (lengths.size() != batch) contract_fail("global_average_pool: one length per sample required");
    Tensor out({batch, channels});
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t len = lengths[b];
        if (len == 0 || len > frames) {
            contract_fail("global_average_pool: length " + std::to_string(len) + " outside [1," +
                          std::to_string(frames) + "]");
        }
        std::vector<double> acc(channels, 0.0);
        for (std::size_t t = 0; t < len; ++t) {
            const float* row = input.raw() + (b * frames + t) * channels;
            for (std::size_t c = 0; c < channels; ++c) acc[c] += row[c];
        }
        for (std::size_t c = 0; c < channels; ++c) out[b * channels + c] = static_cast<float>(acc[c] / len);
    }
    return out;
}

Tensor global_average_pool_vjp(const Lengths& lengths, std::size_t frames, const Tensor& upstream) {
    require_rank(upstream, 2, "global_average_pool_vjp upstream");
    const std::size_t batch = upstream.dim(0);
    const std::size_t channels = upstream.dim(1);
    if (lengths.size() != batch) contract_fail("global_average_pool_vjp: one length per sample required");
    Tensor dx({batch, frames, channels});
    for (std::size_t b = 0; b < batch; ++b) {
        const float inv = 1.0f / static_cast<float>(lengths[b]);
        for (std::size_t t = 0; t < lengths[b]; ++t) {
            float* row = dx.raw() + (b * frames + t) * channels;
            for (std::size_t c = 0; c < channels; ++c) row[c] = upstream[b * channels + c] * inv;
        }
    }
    return dx;
}

void mask_frames_(Tensor& input, const Lengths& lengths) {
    require_rank(input, 3, "mask_frames input");
    const std::size_t batch = input.dim(0);
    const std::size_t frames = input.dim(1);
    const std::size_t channels = input.dim(2);
    if (lengths.size() != batch) contract_fail("mask_frames: one length per sample required");
    for (std::size_t b = 0; b < batch; ++b) {
        if (lengths[b] >= frames) continue;
        float* start = input.raw() + (b * frames + lengths[b]) * channels;
        std::fill(start, start + (frames - lengths[b]) * channels, 0.0f);
    }
}

Tensor mask_frames(const Tensor& input, const Lengths& lengths) {
    Tensor out = input;
    mask_frames_(out, lengths);
    return out;
}

// ---------------------------------------------------------------------------
// dropout

Tensor dropout(const Tensor& input, float rate, Mode mode, Rng& rng, DropoutContext* ctx) {
    if (!(rate >= 0.0f && rate < 1.0f)) throw ConfigError("dropout rate must lie in [0, 1)");
    if (ctx) ctx->mask.clear();
    if (mode == Mode::infer || rate == 0.0f) return input;

    const float keep_scale = 1.0f / (1.0f - rate);
    std::vector<float> mask(input.size());
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        mask[i] = rng.uniform01() < rate ? 0.0f : keep_scale;
        out[i] = input[i] * mask[i];
    }
    if (ctx) ctx->mask = std::move(mask);
    return out;
}

Tensor dropout_vjp(const DropoutContext& ctx, const Tensor& upstream) {
    if (ctx.mask.empty()) return upstream;
    if (ctx.mask.size() != upstream.size()) contract_fail("dropout_vjp: mask size mismatch");
    Tensor dx(upstream.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = upstream[i] * ctx.mask[i];
    return dx;
}

}  // namespace easter
