#include "easter/model_config.hpp"

#include <set>

#include "easter/error.hpp"

namespace easter {

using nlohmann::json;

ModelConfig ModelConfig::canonical(int input_height, int vocab_size) {
    ModelConfig c;
    c.input_height = input_height;
    c.vocab_size = vocab_size;
    auto a = [](int ch, int k, int stride, int dilation, float drop) {
        BlockSpec s;
        s.type = BlockType::A;
        s.out_channels = ch;
        s.kernel = k;
        s.stride = stride;
        s.dilation = dilation;
        s.dropout = drop;
        return s;
    };
    auto b = [](int k, float drop) {
        BlockSpec s;
        s.type = BlockType::B;
        s.conv_layers = 3;
        s.out_channels = 256;
        s.kernel = k;
        s.dropout = drop;
        s.residual = ResidualMode::dense;
        s.se = true;
        return s;
    };
    BlockSpec head;
    head.type = BlockType::C;
    head.out_channels = vocab_size;
    head.kernel = 1;
    c.blocks = {a(128, 3, 2, 1, 0.2f), a(128, 3, 2, 1, 0.2f), b(5, 0.2f), b(7, 0.2f), b(9, 0.3f),
                a(512, 11, 1, 2, 0.4f),  a(512, 1, 1, 1, 0.4f), head};
    return c;
}

ModelConfig ModelConfig::with_ablation(ResidualMode residual, bool se) const {
    ModelConfig c = *this;
    for (auto& b : c.blocks) {
        if (b.type != BlockType::B) continue;
        b.residual = residual;
        b.se = se;
    }
    return c;
}

std::size_t ModelConfig::downsample_factor() const {
    std::size_t f = 1;
    for (const auto& b : blocks) f *= static_cast<std::size_t>(std::max(1, b.stride));
    return f;
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("invalid model config: " + what); };
    if (input_height < 1) fail("input_height must be positive");
    if (vocab_size < 2) fail("vocab_size must be at least 2 (one symbol plus the blank)");
    if (blocks.empty()) fail("no blocks");
    std::size_t type_c = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const BlockSpec& b = blocks[i];
        const std::string where = "blocks[" + std::to_string(i) + "]: ";
        if (b.out_channels < 1) fail(where + "out_channels must be positive");
        if (b.kernel < 1) fail(where + "kernel must be positive");
        if (b.stride < 1) fail(where + "stride must be positive");
        if (b.dilation < 1) fail(where + "dilation must be positive");
        if (b.conv_layers < 1) fail(where + "conv_layers must be positive");
        if (!(b.dropout >= 0.0f && b.dropout < 1.0f)) fail(where + "dropout must lie in [0, 1)");
        if (b.type != BlockType::B) {
            if (b.conv_layers != 1) fail(where + "only type-B blocks repeat conv layers");
            if (b.residual != ResidualMode::none) fail(where + "residual connections apply to type-B blocks only");
            if (b.se) fail(where + "squeeze-and-excitation applies to type-B blocks only");
        } else if (b.stride != 1) {
            fail(where + "type-B blocks must have stride 1");
        }
        if (b.type == BlockType::C) {
            ++type_c;
            if (i + 1 != blocks.size()) fail(where + "the type-C block must be last");
            if (b.out_channels != vocab_size) fail(where + "type-C out_channels must equal vocab_size");
            if (b.stride != 1) fail(where + "type-C block must have stride 1");
            if (b.dropout != 0.0f) fail(where + "type-C block has no dropout");
        }
    }
    if (type_c != 1) fail("exactly one type-C block is required");

    // Residual sources must share the destination's frame rate.
    std::size_t rate = 1;
    std::vector<std::size_t> b_rates;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const BlockSpec& b = blocks[i];
        if (b.type == BlockType::B) {
            b_rates.push_back(rate);
            if (b.residual == ResidualMode::dense) {
                for (auto r : b_rates) {
                    if (r != rate) fail("blocks[" + std::to_string(i) + "]: dense residual sources differ in stride");
                }
            }
        }
        rate *= static_cast<std::size_t>(b.stride);
    }
}

std::string to_string(BlockType t) {
    switch (t) {
        case BlockType::A: return "A";
        case BlockType::B: return "B";
        case BlockType::C: return "C";
    }
    return "?";
}

std::string to_string(ResidualMode m) {
    switch (m) {
        case ResidualMode::none: return "none";
        case ResidualMode::normal: return "normal";
        case ResidualMode::dense: return "dense";
    }
    return "?";
}

std::string to_string(NormKind k) {
    switch (k) {
        case NormKind::batch: return "batch";
        case NormKind::layer: return "layer";
        case NormKind::none: return "none";
    }
    return "?";
}

ResidualMode parse_residual_mode(const std::string& s) {
    if (s == "none") return ResidualMode::none;
    if (s == "normal") return ResidualMode::normal;
    if (s == "dense") return ResidualMode::dense;
    throw ConfigError("unknown residual mode '" + s + "' (expected none|normal|dense)");
}

NormKind parse_norm_kind(const std::string& s) {
    if (s == "batch") return NormKind::batch;
    if (s == "layer") return NormKind::layer;
    if (s == "none") return NormKind::none;
    throw ConfigError("unknown normalization '" + s + "' (expected batch|layer|none)");
}

namespace {

BlockType parse_block_type(const std::string& s) {
    if (s == "A") return BlockType::A;
    if (s == "B") return BlockType::B;
    if (s == "C") return BlockType::C;
    throw ConfigError("unknown block type '" + s + "' (expected A|B|C)");
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) throw ConfigError(path + "." + key + ": unknown key");
    }
}

template <class T>
T field(const json& obj, const std::string& key, const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + "." + key + ": " + e.what());
    }
}

int int_field(const json& obj, const std::string& key, const std::string& path, int fallback) {
    if (obj.contains(key) && !obj.at(key).is_number_integer()) {
        throw ConfigError(path + "." + key + ": expected an integer");
    }
    return field<int>(obj, key, path, fallback);
}

json block_to_json(const BlockSpec& b) {
    json j = {{"type", to_string(b.type)},     {"conv_layers", b.conv_layers}, {"out_channels", b.out_channels},
              {"kernel", b.kernel},            {"stride", b.stride},           {"dilation", b.dilation},
              {"dropout", b.dropout},          {"residual", to_string(b.residual)}, {"se", b.se}};
    return j;
}

BlockSpec block_from_json(const json& j, const std::string& path) {
    reject_unknown(j, {"type", "conv_layers", "out_channels", "kernel", "stride", "dilation", "dropout", "residual", "se"},
                   path);
    if (!j.contains("type")) throw ConfigError(path + ".type: required");
    if (!j.contains("out_channels")) throw ConfigError(path + ".out_channels: required");
    BlockSpec b;
    try {
        b.type = parse_block_type(field<std::string>(j, "type", path, "A"));
        b.residual = parse_residual_mode(field<std::string>(j, "residual", path, "none"));
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    b.conv_layers = int_field(j, "conv_layers", path, 1);
    b.out_channels = int_field(j, "out_channels", path, 0);
    b.kernel = int_field(j, "kernel", path, 1);
    b.stride = int_field(j, "stride", path, 1);
    b.dilation = int_field(j, "dilation", path, 1);
    b.dropout = field<float>(j, "dropout", path, 0.0f);
    b.se = field<bool>(j, "se", path, false);
    return b;
}

}  // namespace

json to_json(const ModelConfig& config) {
    json blocks = json::array();
    for (const auto& b : config.blocks) blocks.push_back(block_to_json(b));
    return {{"input_height", config.input_height},
            {"vocab_size", config.vocab_size},
            {"normalization", to_string(config.normalization)},
            {"seed", config.seed},
            {"blocks", blocks}};
}

ModelConfig model_config_from_json(const json& doc, const std::string& path) {
    reject_unknown(doc, {"input_height", "vocab_size", "normalization", "seed", "blocks", "preset", "residual", "se"},
                   path);
    const int height = int_field(doc, "input_height", path, 80);
    const int vocab = int_field(doc, "vocab_size", path, 80);

    ModelConfig c;
    if (doc.contains("preset")) {
        if (doc.contains("blocks")) throw ConfigError(path + ": 'preset' and 'blocks' are mutually exclusive");
        const auto preset = field<std::string>(doc, "preset", path, "");
        if (preset != "easter2") throw ConfigError(path + ".preset: unknown preset '" + preset + "'");
        c = ModelConfig::canonical(height, vocab);
        ResidualMode residual = ResidualMode::dense;
        try {
            residual = parse_residual_mode(field<std::string>(doc, "residual", path, "dense"));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ".residual: " + e.what());
        }
        c = c.with_ablation(residual, field<bool>(doc, "se", path, true));
    } else {
        if (doc.contains("residual") || doc.contains("se")) {
            throw ConfigError(path + ": 'residual'/'se' switches require a preset; set them per block instead");
        }
        if (!doc.contains("blocks") || !doc.at("blocks").is_array()) {
            throw ConfigError(path + ".blocks: required array (or use \"preset\")");
        }
        c.input_height = height;
        c.vocab_size = vocab;
        const json& blocks = doc.at("blocks");
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            c.blocks.push_back(block_from_json(blocks[i], path + ".blocks[" + std::to_string(i) + "]"));
        }
    }
    try {
        c.normalization = parse_norm_kind(field<std::string>(doc, "normalization", path, "batch"));
    } catch (const ConfigError& e) {
        throw ConfigError(path + ".normalization: " + e.what());
    }
    c.seed = field<std::uint64_t>(doc, "seed", path, 0);
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return c;
}

}  // namespace easter
