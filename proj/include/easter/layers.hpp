#pragma once

// Composite blocks: type-A conv block, 1D squeeze-and-excitation, type-B
// repeated block with residual merge, and the type-C output head.
//
// Parameter structs double as gradient holders: a backward pass fills the
// trainable tensors of a struct of the same type and leaves the rest
// (hyperparameters, running statistics) untouched.

#include <optional>
#include <string>
#include <vector>

#include "easter/numerics.hpp"

namespace easter {

enum class NormKind { batch, layer, none };

struct ConvParams {
    Tensor weight;  // [K, Cin, Cout]
    Tensor bias;    // [Cout]
    int stride = 1;
    int dilation = 1;

    static ConvParams zeros(std::size_t kernel, std::size_t in_ch, std::size_t out_ch, int stride = 1,
                            int dilation = 1);
    std::size_t kernel() const { return weight.dim(0); }
    std::size_t in_channels() const { return weight.dim(1); }
    std::size_t out_channels() const { return weight.dim(2); }
};

struct NormParams {
    NormKind kind = NormKind::batch;
    Tensor gamma;
    Tensor beta;
    BatchNormState state;  // used by NormKind::batch only

    static NormParams make(NormKind kind, std::size_t channels);
};

struct SeParams {
    Tensor w1;  // [C, C/8]
    Tensor b1;  // [C/8]
    Tensor w2;  // [C/8, C]
    Tensor b2;  // [C]

    static std::size_t bottleneck(std::size_t channels);
    static SeParams zeros(std::size_t channels);
};

struct BlockAParams {
    ConvParams conv;
    NormParams norm;
    float dropout = 0.0f;
};

struct ResidualProjection {
    ConvParams conv;  // 1x1
    NormParams norm;
};

struct BlockBParams {
    std::vector<BlockAParams> sub;  // R sub-blocks, all stride 1
    std::optional<SeParams> se;     // applied on the last sub-block only
    std::vector<ResidualProjection> residuals;
};

struct BlockCParams {
    ConvParams conv;
};

/// Name/tensor pairs in a fixed traversal order. The same order is used for
/// parameters and for gradients held in a struct of the same type.
template <class Fn>
void visit_trainable(ConvParams& p, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".weight", p.weight);
    fn(prefix + ".bias", p.bias);
}

template <class Fn>
void visit_trainable(NormParams& p, const std::string& prefix, Fn&& fn) {
    if (p.kind == NormKind::none) return;
    fn(prefix + ".gamma", p.gamma);
    fn(prefix + ".beta", p.beta);
}

template <class Fn>
void visit_trainable(SeParams& p, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".fc1.weight", p.w1);
    fn(prefix + ".fc1.bias", p.b1);
    fn(prefix + ".fc2.weight", p.w2);
    fn(prefix + ".fc2.bias", p.b2);
}

template <class Fn>
void visit_trainable(BlockAParams& p, const std::string& prefix, Fn&& fn) {
    visit_trainable(p.conv, prefix + ".conv", fn);
    visit_trainable(p.norm, prefix + ".norm", fn);
}

template <class Fn>
void visit_trainable(BlockBParams& p, const std::string& prefix, Fn&& fn) {
    for (std::size_t r = 0; r < p.sub.size(); ++r) visit_trainable(p.sub[r], prefix + ".sub" + std::to_string(r), fn);
    if (p.se) visit_trainable(*p.se, prefix + ".se", fn);
    for (std::size_t j = 0; j < p.residuals.size(); ++j) {
        visit_trainable(p.residuals[j].conv, prefix + ".res" + std::to_string(j) + ".conv", fn);
        visit_trainable(p.residuals[j].norm, prefix + ".res" + std::to_string(j) + ".norm", fn);
    }
}

template <class Fn>
void visit_trainable(BlockCParams& p, const std::string& prefix, Fn&& fn) {
    visit_trainable(p.conv, prefix + ".conv", fn);
}

/// A gradient holder shaped like `params`, with every trainable tensor zeroed.
template <class P>
P zero_grads_like(const P& params) {
    P grads = params;
    visit_trainable(grads, "", [](const std::string&, Tensor& t) { t.fill(0.0f); });
    return grads;
}

// ---------------------------------------------------------------------------
// single-layer helpers

Tensor conv_forward(const ConvParams& p, const Tensor& x, Conv1dContext* ctx);
/// Adds weight/bias gradients into `grads`; returns the input gradient.
Tensor conv_backward(const ConvParams& p, const Conv1dContext& ctx, const Tensor& dy, ConvParams& grads);

Tensor norm_forward(NormParams& p, const Tensor& x, Mode mode, NormContext* ctx);
Tensor norm_backward(const NormParams& p, const NormContext& ctx, const Tensor& dy, NormParams& grads);

// ---------------------------------------------------------------------------
// squeeze-and-excitation

struct SeContext {
    Lengths lengths;
    std::size_t frames = 0;
    Tensor features;
    FullyConnectedContext fc1;
    ActivationContext relu;
    FullyConnectedContext fc2;
    ActivationContext gate;
    Tensor context;  // [B, C], sigmoid output
};

/// context = sigmoid(fc2(relu(fc1(masked_mean(x))))); out = context * x.
Tensor se_forward(const Tensor& features, const SeParams& params, const Lengths& lengths, SeContext* ctx = nullptr);
Tensor se_backward(const SeParams& params, const SeContext& ctx, const Tensor& dy, SeParams& grads);

// ---------------------------------------------------------------------------
// blocks

struct BlockOutput {
    Tensor y;
    Lengths lengths;
};

struct BlockAContext {
    Conv1dContext conv;
    NormContext norm;
    ActivationContext relu;
    DropoutContext drop;
    Lengths out_lengths;
};

/// conv -> norm -> ReLU -> dropout, then frames past each sample's new length
/// are zeroed. new_lengths[b] = ceil(lengths[b] / stride).
BlockOutput block_a_forward(const Tensor& x, const Lengths& lengths, BlockAParams& params, Mode mode, Rng& rng,
                            BlockAContext* ctx = nullptr);
Tensor block_a_backward(const BlockAParams& params, const BlockAContext& ctx, const Tensor& dy, BlockAParams& grads);

struct BlockBContext {
    std::vector<BlockAContext> head;  // sub-blocks 0..R-2
    Conv1dContext last_conv;
    NormContext last_norm;
    std::optional<SeContext> se;
    std::vector<Conv1dContext> res_conv;
    std::vector<NormContext> res_norm;
    ActivationContext relu;
    DropoutContext drop;
    Lengths lengths;
};

struct BlockBOutput {
    Tensor y;
    /// What this block contributes as a residual source to later blocks: its input.
    Tensor residual_snapshot;
};

struct BlockBGrads {
    Tensor input;
    std::vector<Tensor> sources;
};

/// Sub-blocks 0..R-2 run conv -> norm -> ReLU -> dropout. The last runs
/// conv -> norm -> SE, adds norm(conv1x1(source)) for every residual source,
/// then ReLU -> dropout. Sequence length is preserved.
BlockBOutput block_b_forward(const Tensor& x, const Lengths& lengths, const std::vector<const Tensor*>& sources,
                             BlockBParams& params, Mode mode, Rng& rng, BlockBContext* ctx = nullptr);
BlockBGrads block_b_backward(const BlockBParams& params, const BlockBContext& ctx, const Tensor& dy,
                             BlockBParams& grads);

/// Per-frame projection to vocabulary logits (no softmax).
Tensor block_c_forward(const Tensor& x, const BlockCParams& params, Conv1dContext* ctx = nullptr);
Tensor block_c_backward(const BlockCParams& params, const Conv1dContext& ctx, const Tensor& dy, BlockCParams& grads);

}  // namespace easter
