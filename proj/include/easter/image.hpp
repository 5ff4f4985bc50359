#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace easter {

/// 8-bit grayscale image, row-major; 255 is white background.
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(std::size_t h, std::size_t w, std::uint8_t fill = 255) : height(h), width(w), pixels(h * w, fill) {}

    std::uint8_t& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
    std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

inline constexpr std::uint8_t kBackground = 255;

/// Binary PGM (P5, maxval <= 255). Comments in the header are allowed.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes);

/// Bilinear resampling with half-pixel centres and edge clamping.
/// Returns real-valued intensities in the source scale, row-major [h, w].
std::vector<float> resize_bilinear(const GrayImage& image, std::size_t out_height, std::size_t out_width);

/// Same resampling, rounded back to 8-bit.
GrayImage resize_image(const GrayImage& image, std::size_t out_height, std::size_t out_width);

}  // namespace easter
