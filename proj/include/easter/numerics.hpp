#pragma once

// Differentiable primitives over dense float tensors.
//
// Every learnable op comes as a forward function that optionally records a
// context, plus a `*_vjp` that maps an upstream gradient back through it.
// Sequence tensors are laid out [batch, time, channels].

#include <cstddef>
#include <vector>

#include "easter/rng.hpp"
#include "easter/tensor.hpp"

namespace easter {

enum class Mode { train, infer };

/// Per-sample count of valid (unpadded) frames.
using Lengths = std::vector<std::size_t>;

// ---------------------------------------------------------------------------
// conv1d

/// Output frames under same-padding: ceil(T / stride).
std::size_t conv1d_output_length(std::size_t length, int stride);
/// Zero frames inserted before the first input frame.
std::size_t conv1d_left_pad(std::size_t length, std::size_t kernel, int stride, int dilation);

struct Conv1dContext {
    Tensor input;
    int stride = 1;
    int dilation = 1;
};

struct Conv1dGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

/// input [B,T,Cin], weight [K,Cin,Cout], bias [Cout] -> [B,ceil(T/stride),Cout].
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int dilation,
              Conv1dContext* ctx = nullptr);
Conv1dGrads conv1d_vjp(const Conv1dContext& ctx, const Tensor& weight, const Tensor& upstream);

// ---------------------------------------------------------------------------
// normalization

struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    float momentum = 0.1f;
    float epsilon = 1e-3f;

    static BatchNormState identity(std::size_t channels);
};

struct NormContext {
    Tensor normalized;            // x_hat
    std::vector<float> inv_std;   // per channel (batch norm) or per frame (layer norm)
    Mode mode = Mode::infer;
};

struct NormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};

/// Train mode normalizes each channel over the B and T axes with biased batch
/// variance and folds the batch statistics into `state`; infer mode reads the
/// running statistics only.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormState& state, Mode mode,
                  NormContext* ctx = nullptr);
NormGrads batch_norm_vjp(const NormContext& ctx, const Tensor& gamma, const Tensor& upstream);

inline constexpr float kLayerNormEpsilon = 1e-3f;

/// Normalizes every [b,t] frame over its channels.
Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, NormContext* ctx = nullptr);
NormGrads layer_norm_vjp(const NormContext& ctx, const Tensor& gamma, const Tensor& upstream);

// ---------------------------------------------------------------------------
// elementwise

enum class Activation { relu, sigmoid };

struct ActivationContext {
    Activation kind = Activation::relu;
    Tensor saved;  // input for relu, output for sigmoid
};

Tensor activation(Activation kind, const Tensor& input, ActivationContext* ctx = nullptr);
Tensor activation_vjp(const ActivationContext& ctx, const Tensor& upstream);

/// Row-wise log-softmax over the last axis. The VJP takes the forward output.
Tensor log_softmax(const Tensor& input);
Tensor log_softmax_vjp(const Tensor& output, const Tensor& upstream);

// ---------------------------------------------------------------------------
// fully connected

struct FullyConnectedContext {
    Tensor input;
};

struct FullyConnectedGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

/// Affine map over the last axis: [...,Din] x [Din,Dout] + [Dout].
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias,
                       FullyConnectedContext* ctx = nullptr);
FullyConnectedGrads fully_connected_vjp(const FullyConnectedContext& ctx, const Tensor& weight,
                                        const Tensor& upstream);

// ---------------------------------------------------------------------------
// pooling and masking

/// Mean over the first lengths[b] frames of each sample: [B,T,C] -> [B,C].
Tensor global_average_pool(const Tensor& input, const Lengths& lengths);
Tensor global_average_pool_vjp(const Lengths& lengths, std::size_t frames, const Tensor& upstream);

/// Zeroes frames t >= lengths[b]. Linear, so it is its own VJP.
Tensor mask_frames(const Tensor& input, const Lengths& lengths);
void mask_frames_(Tensor& input, const Lengths& lengths);

// ---------------------------------------------------------------------------
// dropout

struct DropoutContext {
    std::vector<float> mask;  // 0 or 1/(1-rate) per element; empty means identity
};

/// Inverted dropout. Infer mode and rate 0 are exact identities.
Tensor dropout(const Tensor& input, float rate, Mode mode, Rng& rng, DropoutContext* ctx = nullptr);
Tensor dropout_vjp(const DropoutContext& ctx, const Tensor& upstream);

}  // namespace easter
