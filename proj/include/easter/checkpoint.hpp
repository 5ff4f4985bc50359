#pragma once

// Binary checkpoint:
//   "ESTR2\0" | u32 version | u64 n + n bytes JSON header |
//   u64 tensor count | per tensor: u32 name length, name, u32 rank,
//   rank x u64 extents, raw little-endian float32 |
//   u32 CRC-32 of every preceding byte.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "easter/model.hpp"
#include "easter/optimizer.hpp"
#include "easter/vocabulary.hpp"

namespace easter {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainState {
    std::uint64_t epoch = 0;  // completed epochs
    std::optional<double> best_cer;
    std::uint64_t stale_epochs = 0;
    double lr = 1e-3;

    friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct Checkpoint {
    Model model;
    Vocabulary vocab;
    std::optional<AdamState> adam;
    TrainState state;
};

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const Vocabulary& vocab, const AdamState* adam,
                                            const TrainState& state);
/// Throws FormatError on bad magic, version or truncation, ChecksumError on
/// CRC mismatch, ConfigError when the stored tensors disagree with the
/// stored config (for example a vocabulary-size mismatch).
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes through a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab,
                     const AdamState* adam, const TrainState& state);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace easter
