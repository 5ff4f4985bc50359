#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "easter/layers.hpp"
#include "easter/model_config.hpp"

namespace easter {

struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

struct NamedConstTensor {
    std::string name;
    const Tensor* tensor;
};

using BlockParams = std::variant<BlockAParams, BlockBParams, BlockCParams>;

struct Block {
    BlockSpec spec;
    BlockParams params;
    /// Indices into the activation list (0 = network input, i+1 = output of
    /// block i) feeding this block's residual projections, in order.
    std::vector<std::size_t> residual_sources;
};

/// A built network: config plus every parameter and running statistic.
class Model {
public:
    /// Validates the config and initializes all parameters from config.seed.
    static Model build(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    std::vector<Block>& blocks() { return blocks_; }
    const std::vector<Block>& blocks() const { return blocks_; }
    std::uint64_t id() const { return id_; }

    /// Trainable tensors in a fixed order; names are unique.
    std::vector<NamedTensor> parameters();
    std::vector<NamedConstTensor> parameters() const;
    /// Batch-norm running statistics (not trainable, not counted).
    std::vector<NamedTensor> buffers();
    std::vector<NamedConstTensor> buffers() const;

    std::size_t count_params() const;

private:
    ModelConfig config_;
    std::vector<Block> blocks_;
    std::uint64_t id_ = 0;
};

/// Trainable-tensor gradients, aligned with Model::parameters().
struct Gradients {
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    double global_norm() const;
    bool all_finite() const;
};

using BlockContext = std::variant<BlockAContext, BlockBContext, Conv1dContext>;

struct ForwardContext {
    std::uint64_t model_id = 0;
    std::vector<BlockContext> blocks;
    Shape logits_shape;
    bool consumed = false;
};

struct ForwardResult {
    Tensor logits;       // [B, ceil(W/4), V] for the canonical layout, pre-softmax
    Lengths out_lengths; // ceil(true_width / downsample)
};

/// images [B,W,H] with per-sample true widths. The width is padded with zeros
/// to a multiple of the downsampling factor so every strided layer sees the
/// same phase; frames past each sample's length are zeroed after each block.
ForwardResult forward(Model& model, const Tensor& images, const Lengths& true_widths, Mode mode, Rng& rng,
                      ForwardContext* ctx = nullptr);

/// Gradients of sum(logits * grad_logits) for the forward pass recorded in
/// ctx. A context may be consumed once.
Gradients backward(const Model& model, ForwardContext& ctx, const Tensor& grad_logits);

/// Sign of every ReLU input recorded in ctx, in traversal order. Two forward
/// passes with equal patterns lie on the same linear piece of every ReLU.
std::vector<bool> relu_pattern(const ForwardContext& ctx);

/// Output frames for an input of width `width`.
std::size_t output_length(const ModelConfig& config, std::size_t width);

}  // namespace easter
