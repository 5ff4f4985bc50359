#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "easter/layers.hpp"

namespace easter {

enum class BlockType { A, B, C };
enum class ResidualMode { none, normal, dense };

struct BlockSpec {
    BlockType type = BlockType::A;
    int conv_layers = 1;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int dilation = 1;
    float dropout = 0.0f;
    ResidualMode residual = ResidualMode::none;
    bool se = false;

    friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct ModelConfig {
    int input_height = 80;
    int vocab_size = 80;  // includes the CTC blank, which takes the last index
    std::vector<BlockSpec> blocks;
    NormKind normalization = NormKind::batch;
    std::uint64_t seed = 0;

    /// The 8-block network: two strided type-A stems, three dense-residual
    /// type-B blocks with SE, a dilated type-A, a 1x1 type-A and the head.
    static ModelConfig canonical(int input_height = 80, int vocab_size = 80);

    /// Same block layout with every type-B block switched to `residual`/`se`.
    ModelConfig with_ablation(ResidualMode residual, bool se) const;

    int blank_index() const { return vocab_size - 1; }
    /// Product of all block strides.
    std::size_t downsample_factor() const;

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string to_string(BlockType t);
std::string to_string(ResidualMode m);
std::string to_string(NormKind k);
ResidualMode parse_residual_mode(const std::string& s);
NormKind parse_norm_kind(const std::string& s);

nlohmann::json to_json(const ModelConfig& config);

/// Accepts either an explicit "blocks" list or {"preset": "easter2"} with
/// optional "residual"/"se" overrides. Unknown keys are rejected. Errors name
/// the offending field path (e.g. "model.blocks[3].kernel").
ModelConfig model_config_from_json(const nlohmann::json& doc, const std::string& path = "model");

}  // namespace easter
