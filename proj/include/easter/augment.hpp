#pragma once

// Tiling-and-corruption augmentation: cut a line image into tiles along its
// width and/or height, replace each tile with a corrupted one with
// probability C_p, and stitch the tiles back in order.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "easter/image.hpp"
#include "easter/rng.hpp"

namespace easter {

enum class Corruption { black, white, mean, random, miscellaneous };

std::string to_string(Corruption c);
Corruption parse_corruption(const std::string& s);

struct TacoConfig {
    double corruption_prob = 0.25;   // C_p
    std::size_t max_tile_width = 0;  // T_max in pixels; 0 means "image height"
    bool vertical = true;            // tiles across the width
    bool horizontal = true;          // tiles across the height
    Corruption kind = Corruption::random;
    std::uint64_t seed = 0;

    /// T_max actually used for an image of this height.
    std::size_t resolved_max_tile(std::size_t height) const { return max_tile_width ? max_tile_width : height; }
    /// Throws ConfigError unless C_p is in [0,1] and T_max >= ceil(H/10).
    void validate(std::size_t height) const;
};

struct TileRegion {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    Corruption applied = Corruption::black;  // never miscellaneous
};

struct TacoTrace {
    std::size_t tiles = 0;
    std::vector<TileRegion> corrupted;
};

/// Uniform integer in [ceil(H/10), T_max].
std::size_t sample_tile_width(std::size_t height, std::size_t max_tile_width, Rng& rng);

/// Replacement content for one tile. `applied` receives the concrete kind
/// chosen when `kind` is miscellaneous.
GrayImage make_corrupt_tile(Corruption kind, std::size_t height, std::size_t width, const GrayImage& source_tile,
                            Rng& rng, Corruption* applied = nullptr);

/// Output has the input's exact dimensions. Vertical tiling runs first when
/// both orientations are enabled, each pass with its own tile width.
GrayImage taco(const GrayImage& image, const TacoConfig& config, Rng& rng, TacoTrace* trace = nullptr);

inline constexpr std::size_t kPreviewSeparator = 8;

/// Before | separator | after, side by side.
GrayImage preview_image(const GrayImage& before, const GrayImage& after);
/// Runs taco and writes the side-by-side preview as PGM.
GrayImage preview(const GrayImage& image, const TacoConfig& config, Rng& rng, const std::filesystem::path& out_path);

}  // namespace easter
