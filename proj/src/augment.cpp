#include "easter/augment.hpp"

#include <algorithm>

#include "easter/error.hpp"

namespace easter {

std::string to_string(Corruption c) {
    switch (c) {
        case Corruption::black: return "black";
        case Corruption::white: return "white";
        case Corruption::mean: return "mean";
        case Corruption::random: return "random";
        case Corruption::miscellaneous: return "miscellaneous";
    }
    return "?";
}

Corruption parse_corruption(const std::string& s) {
    if (s == "black") return Corruption::black;
    if (s == "white") return Corruption::white;
    if (s == "mean") return Corruption::mean;
    if (s == "random") return Corruption::random;
    if (s == "miscellaneous" || s == "misc") return Corruption::miscellaneous;
    throw ConfigError("unknown corruption kind '" + s + "' (expected black|white|mean|random|miscellaneous)");
}

namespace {

std::size_t min_tile(std::size_t height) { return std::max<std::size_t>(1, (height + 9) / 10); }

GrayImage crop(const GrayImage& img, std::size_t row, std::size_t col, std::size_t h, std::size_t w) {
    GrayImage out(h, w);
    for (std::size_t r = 0; r < h; ++r) {
        std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>((row + r) * img.width + col), w,
                    out.pixels.begin() + static_cast<std::ptrdiff_t>(r * w));
    }
    return out;
}

void paste(GrayImage& img, const GrayImage& tile, std::size_t row, std::size_t col) {
    for (std::size_t r = 0; r < tile.height; ++r) {
        std::copy_n(tile.pixels.begin() + static_cast<std::ptrdiff_t>(r * tile.width), tile.width,
                    img.pixels.begin() + static_cast<std::ptrdiff_t>((row + r) * img.width + col));
    }
}

// One tiling pass; tiles run along columns (vertical) or rows (horizontal).
void tiling_pass(GrayImage& img, bool across_width, const TacoConfig& cfg, Rng& rng, TacoTrace* trace) {
    const std::size_t tile = sample_tile_width(img.height, cfg.resolved_max_tile(img.height), rng);
    const std::size_t extent = across_width ? img.width : img.height;
    for (std::size_t start = 0; start < extent; start += tile) {
        const std::size_t len = std::min(tile, extent - start);
        const double p = rng.uniform01();
        if (trace) ++trace->tiles;
        if (!(p <= cfg.corruption_prob)) continue;
        const std::size_t row = across_width ? 0 : start;
        const std::size_t col = across_width ? start : 0;
        const std::size_t h = across_width ? img.height : len;
        const std::size_t w = across_width ? len : img.width;
        Corruption applied = cfg.kind;
        const GrayImage replacement = make_corrupt_tile(cfg.kind, h, w, crop(img, row, col, h, w), rng, &applied);
        paste(img, replacement, row, col);
        if (trace) trace->corrupted.push_back({row, col, h, w, applied});
    }
}

}  // namespace

void TacoConfig::validate(std::size_t height) const {
    if (!(corruption_prob >= 0.0 && corruption_prob <= 1.0)) throw ConfigError("taco: C_p must lie in [0, 1]");
    if (!vertical && !horizontal) throw ConfigError("taco: at least one orientation is required");
    if (resolved_max_tile(height) < min_tile(height)) {
        throw ConfigError("taco: T_max " + std::to_string(resolved_max_tile(height)) + " is below ceil(H/10) = " +
                          std::to_string(min_tile(height)));
    }
}

std::size_t sample_tile_width(std::size_t height, std::size_t max_tile_width, Rng& rng) {
    const std::size_t lo = min_tile(height);
    if (max_tile_width < lo) {
        throw ConfigError("sample_tile_width: T_max " + std::to_string(max_tile_width) + " below ceil(H/10) = " +
                          std::to_string(lo));
    }
    return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(max_tile_width)));
}

GrayImage make_corrupt_tile(Corruption kind, std::size_t height, std::size_t width, const GrayImage& source_tile,
                            Rng& rng, Corruption* applied) {
    if (height == 0 || width == 0) throw ContractViolation("make_corrupt_tile: dimensions must be positive");
    if (kind == Corruption::miscellaneous) {
        static constexpr Corruption kinds[] = {Corruption::black, Corruption::white, Corruption::mean,
                                               Corruption::random};
        kind = kinds[rng.uniform_int(0, 3)];
    }
    if (applied) *applied = kind;
    GrayImage out(height, width);
    switch (kind) {
        case Corruption::black:
            std::fill(out.pixels.begin(), out.pixels.end(), std::uint8_t{0});
            break;
        case Corruption::white:
            std::fill(out.pixels.begin(), out.pixels.end(), std::uint8_t{255});
            break;
        case Corruption::mean: {
            const std::uint64_t n = source_tile.pixels.size();
            std::uint64_t sum = 0;
            for (auto p : source_tile.pixels) sum += p;
            // round half up
            const auto value = n ? static_cast<std::uint8_t>((2 * sum + n) / (2 * n)) : kBackground;
            std::fill(out.pixels.begin(), out.pixels.end(), value);
            break;
        }
        case Corruption::random:
            for (auto& p : out.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
            break;
        case Corruption::miscellaneous:
            break;
    }
    return out;
}

GrayImage taco(const GrayImage& image, const TacoConfig& config, Rng& rng, TacoTrace* trace) {
    config.validate(image.height);
    GrayImage out = image;
    if (config.vertical) tiling_pass(out, true, config, rng, trace);
    if (config.horizontal) tiling_pass(out, false, config, rng, trace);
    return out;
}

GrayImage preview_image(const GrayImage& before, const GrayImage& after) {
    if (before.height != after.height || before.width != after.width) {
        throw ContractViolation("preview_image: before/after dimensions differ");
    }
    GrayImage out(before.height, 2 * before.width + kPreviewSeparator, 128);
    paste(out, before, 0, 0);
    paste(out, after, 0, before.width + kPreviewSeparator);
    return out;
}

GrayImage preview(const GrayImage& image, const TacoConfig& config, Rng& rng, const std::filesystem::path& out_path) {
    const GrayImage augmented = taco(image, config, rng);
    GrayImage side = preview_image(image, augmented);
    write_pgm(side, out_path);
    return side;
}

}  // namespace easter
