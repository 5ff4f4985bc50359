#include "easter/layers.hpp"

#include <algorithm>

#include "easter/error.hpp"

namespace easter {

namespace {

void accumulate(Tensor& dst, const Tensor& src) {
    if (dst.empty() && dst.shape() != src.shape()) {
        dst = src;
        return;
    }
    dst.add_(src);
}

}  // namespace

ConvParams ConvParams::zeros(std::size_t kernel, std::size_t in_ch, std::size_t out_ch, int stride, int dilation) {
    ConvParams p;
    p.weight = Tensor({kernel, in_ch, out_ch});
    p.bias = Tensor({out_ch});
    p.stride = stride;
    p.dilation = dilation;
    return p;
}

NormParams NormParams::make(NormKind kind, std::size_t channels) {
    NormParams p;
    p.kind = kind;
    if (kind != NormKind::none) {
        p.gamma = Tensor({channels}, 1.0f);
        p.beta = Tensor({channels}, 0.0f);
    }
    if (kind == NormKind::batch) p.state = BatchNormState::identity(channels);
    return p;
}

std::size_t SeParams::bottleneck(std::size_t channels) { return std::max<std::size_t>(1, channels / 8); }

SeParams SeParams::zeros(std::size_t channels) {
    const std::size_t mid = bottleneck(channels);
    return SeParams{Tensor({channels, mid}), Tensor({mid}), Tensor({mid, channels}), Tensor({channels})};
}

// ---------------------------------------------------------------------------

Tensor conv_forward(const ConvParams& p, const Tensor& x, Conv1dContext* ctx) {
    return conv1d(x, p.weight, p.bias, p.stride, p.dilation, ctx);
}

Tensor conv_backward(const ConvParams& p, const Conv1dContext& ctx, const Tensor& dy, ConvParams& grads) {
    Conv1dGrads g = conv1d_vjp(ctx, p.weight, dy);
    accumulate(grads.weight, g.weight);
    accumulate(grads.bias, g.bias);
    return std::move(g.input);
}

Tensor norm_forward(NormParams& p, const Tensor& x, Mode mode, NormContext* ctx) {
    switch (p.kind) {
        case NormKind::batch:
            return batch_norm(x, p.gamma, p.beta, p.state, mode, ctx);
        case NormKind::layer:
            return layer_norm(x, p.gamma, p.beta, ctx);
        case NormKind::none:
            break;
    }
    return x;
}

Tensor norm_backward(const NormParams& p, const NormContext& ctx, const Tensor& dy, NormParams& grads) {
    if (p.kind == NormKind::none) return dy;
    NormGrads g = p.kind == NormKind::batch ? batch_norm_vjp(ctx, p.gamma, dy) : layer_norm_vjp(ctx, p.gamma, dy);
    accumulate(grads.gamma, g.gamma);
    accumulate(grads.beta, g.beta);
    return std::move(g.input);
}

// ---------------------------------------------------------------------------
// squeeze-and-excitation

Tensor se_forward(const Tensor& features, const SeParams& params, const Lengths& lengths, SeContext* ctx) {
    if (features.rank() != 3 || features.dim(2) != params.w1.dim(0)) {
        contract_fail("se_forward: features " + shape_string(features.shape()) + " do not match SE width " +
                      std::to_string(params.w1.dim(0)));
    }
    const std::size_t batch = features.dim(0);
    const std::size_t frames = features.dim(1);
    const std::size_t channels = features.dim(2);

    SeContext local;
    SeContext& c = ctx ? *ctx : local;
    const Tensor pooled = global_average_pool(features, lengths);
    const Tensor z1 = fully_connected(pooled, params.w1, params.b1, &c.fc1);
    const Tensor a1 = activation(Activation::relu, z1, &c.relu);
    const Tensor z2 = fully_connected(a1, params.w2, params.b2, &c.fc2);
    Tensor gate = activation(Activation::sigmoid, z2, &c.gate);

    Tensor out(features.shape());
    for (std::size_t b = 0; b < batch; ++b) {
        const float* g = gate.raw() + b * channels;
        for (std::size_t t = 0; t < frames; ++t) {
            const std::size_t off = (b * frames + t) * channels;
            for (std::size_t ch = 0; ch < channels; ++ch) out[off + ch] = g[ch] * features[off + ch];
        }
    }
    if (ctx) {
        ctx->lengths = lengths;
        ctx->frames = frames;
        ctx->features = features;
        ctx->context = std::move(gate);
    }
    return out;
}

Tensor se_backward(const SeParams& params, const SeContext& ctx, const Tensor& dy, SeParams& grads) {
    require_same_shape(ctx.features, dy, "se_backward");
    const std::size_t batch = dy.dim(0);
    const std::size_t frames = dy.dim(1);
    const std::size_t channels = dy.dim(2);

    Tensor dfeat(dy.shape());
    Tensor dgate({batch, channels});
    for (std::size_t b = 0; b < batch; ++b) {
        const float* g = ctx.context.raw() + b * channels;
        std::vector<double> acc(channels, 0.0);
        for (std::size_t t = 0; t < frames; ++t) {
            const std::size_t off = (b * frames + t) * channels;
            for (std::size_t ch = 0; ch < channels; ++ch) {
                dfeat[off + ch] = g[ch] * dy[off + ch];
                acc[ch] += static_cast<double>(dy[off + ch]) * ctx.features[off + ch];
            }
        }
        for (std::size_t ch = 0; ch < channels; ++ch) dgate[b * channels + ch] = static_cast<float>(acc[ch]);
    }

    const Tensor dz2 = activation_vjp(ctx.gate, dgate);
    FullyConnectedGrads g2 = fully_connected_vjp(ctx.fc2, params.w2, dz2);
    accumulate(grads.w2, g2.weight);
    accumulate(grads.b2, g2.bias);
    const Tensor dz1 = activation_vjp(ctx.relu, g2.input);
    FullyConnectedGrads g1 = fully_connected_vjp(ctx.fc1, params.w1, dz1);
    accumulate(grads.w1, g1.weight);
    accumulate(grads.b1, g1.bias);
    dfeat.add_(global_average_pool_vjp(ctx.lengths, ctx.frames, g1.input));
    return dfeat;
}

// ---------------------------------------------------------------------------
// type A

BlockOutput block_a_forward(const Tensor& x, const Lengths& lengths, BlockAParams& params, Mode mode, Rng& rng,
                            BlockAContext* ctx) {
    if (lengths.size() != x.dim(0)) contract_fail("block_a_forward: one length per sample required");
    BlockAContext local;
    BlockAContext& c = ctx ? *ctx : local;

    Tensor h = conv_forward(params.conv, x, &c.conv);
    h = norm_forward(params.norm, h, mode, &c.norm);
    h = activation(Activation::relu, h, &c.relu);
    h = dropout(h, params.dropout, mode, rng, &c.drop);

    Lengths out_lengths(lengths.size());
    for (std::size_t b = 0; b < lengths.size(); ++b) {
        out_lengths[b] = conv1d_output_length(lengths[b], params.conv.stride);
    }
    mask_frames_(h, out_lengths);
    c.out_lengths = out_lengths;
    return {std::move(h), std::move(out_lengths)};
}

Tensor block_a_backward(const BlockAParams& params, const BlockAContext& ctx, const Tensor& dy, BlockAParams& grads) {
    Tensor d = mask_frames(dy, ctx.out_lengths);
    d = dropout_vjp(ctx.drop, d);
    d = activation_vjp(ctx.relu, d);
    d = norm_backward(params.norm, ctx.norm, d, grads.norm);
    return conv_backward(params.conv, ctx.conv, d, grads.conv);
}

// ---------------------------------------------------------------------------
// type B

BlockBOutput block_b_forward(const Tensor& x, const Lengths& lengths, const std::vector<const Tensor*>& sources,
                             BlockBParams& params, Mode mode, Rng& rng, BlockBContext* ctx) {
    if (params.sub.empty()) contract_fail("block_b_forward: at least one sub-block required");
    if (sources.size() != params.residuals.size()) {
        contract_fail("block_b_forward: " + std::to_string(sources.size()) + " residual sources for " +
                      std::to_string(params.residuals.size()) + " projections");
    }
    const std::size_t frames = x.dim(1);
    BlockBContext local;
    BlockBContext& c = ctx ? *ctx : local;
    c.head.assign(params.sub.size() - 1, BlockAContext{});
    c.lengths = lengths;

    Tensor cur = x;
    for (std::size_t r = 0; r + 1 < params.sub.size(); ++r) {
        if (params.sub[r].conv.stride != 1) contract_fail("block_b_forward: type-B sub-blocks must be stride 1");
        cur = block_a_forward(cur, lengths, params.sub[r], mode, rng, &c.head[r]).y;
    }

    BlockAParams& last = params.sub.back();
    if (last.conv.stride != 1) contract_fail("block_b_forward: type-B sub-blocks must be stride 1");
    Tensor h = conv_forward(last.conv, cur, &c.last_conv);
    h = norm_forward(last.norm, h, mode, &c.last_norm);
    if (params.se) {
        c.se.emplace();
        h = se_forward(h, *params.se, lengths, &*c.se);
    } else {
        c.se.reset();
    }

    c.res_conv.assign(params.residuals.size(), Conv1dContext{});
    c.res_norm.assign(params.residuals.size(), NormContext{});
    for (std::size_t j = 0; j < params.residuals.size(); ++j) {
        const Tensor& src = *sources[j];
        if (src.rank() != 3 || src.dim(0) != x.dim(0) || src.dim(1) != frames) {
            contract_fail("block_b_forward: residual source " + std::to_string(j) + " has shape " +
                          shape_string(src.shape()) + ", block input has " + std::to_string(frames) + " frames");
        }
        if (src.dim(2) != params.residuals[j].conv.in_channels()) {
            contract_fail("block_b_forward: residual source " + std::to_string(j) + " has " +
                          std::to_string(src.dim(2)) + " channels, projection expects " +
                          std::to_string(params.residuals[j].conv.in_channels()));
        }
        Tensor r = conv_forward(params.residuals[j].conv, src, &c.res_conv[j]);
        r = norm_forward(params.residuals[j].norm, r, mode, &c.res_norm[j]);
        h.add_(r);
    }

    h = activation(Activation::relu, h, &c.relu);
    h = dropout(h, last.dropout, mode, rng, &c.drop);
    mask_frames_(h, lengths);
    if (h.dim(1) != frames) contract_fail("block_b_forward: type-B block changed the sequence length");
    return {std::move(h), x};
}

BlockBGrads block_b_backward(const BlockBParams& params, const BlockBContext& ctx, const Tensor& dy,
                             BlockBParams& grads) {
    Tensor d = mask_frames(dy, ctx.lengths);
    d = dropout_vjp(ctx.drop, d);
    d = activation_vjp(ctx.relu, d);

    BlockBGrads out;
    out.sources.resize(params.residuals.size());
    for (std::size_t j = 0; j < params.residuals.size(); ++j) {
        const Tensor dr = norm_backward(params.residuals[j].norm, ctx.res_norm[j], d, grads.residuals[j].norm);
        out.sources[j] = conv_backward(params.residuals[j].conv, ctx.res_conv[j], dr, grads.residuals[j].conv);
    }

    if (params.se) d = se_backward(*params.se, *ctx.se, d, *grads.se);
    const BlockAParams& last = params.sub.back();
    d = norm_backward(last.norm, ctx.last_norm, d, grads.sub.back().norm);
    d = conv_backward(last.conv, ctx.last_conv, d, grads.sub.back().conv);

    for (std::size_t r = params.sub.size() - 1; r-- > 0;) {
        d = block_a_backward(params.sub[r], ctx.head[r], d, grads.sub[r]);
    }
    out.input = std::move(d);
    return out;
}

// ---------------------------------------------------------------------------
// type C

Tensor block_c_forward(const Tensor& x, const BlockCParams& params, Conv1dContext* ctx) {
    return conv_forward(params.conv, x, ctx);
}

Tensor block_c_backward(const BlockCParams& params, const Conv1dContext& ctx, const Tensor& dy, BlockCParams& grads) {
    return conv_backward(params.conv, ctx, dy, grads.conv);
}

}  // namespace easter
