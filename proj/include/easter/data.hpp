#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "easter/augment.hpp"
#include "easter/ctc.hpp"
#include "easter/image.hpp"
#include "easter/numerics.hpp"
#include "easter/rng.hpp"
#include "easter/tensor.hpp"
#include "easter/vocabulary.hpp"

namespace easter {

struct Sample {
    std::filesystem::path image_path;
    std::optional<GrayImage> image;  // set for synthesized or preloaded samples
    std::string transcription;       // UTF-8
    std::string split;
};

/// Reads `<image-path>\t<transcription>` records. Relative image paths are
/// resolved against the manifest's directory. With a vocabulary, every
/// transcription symbol is checked and failures name the line.
std::vector<Sample> load_manifest(const std::filesystem::path& path, const Vocabulary* vocab = nullptr,
                                  const std::string& split = "");

/// The in-memory image if present, otherwise the file.
GrayImage load_sample_image(const Sample& sample);
/// Reads every sample's image into memory.
void preload_images(std::vector<Sample>& samples);

/// Width after scaling an h-pixel-high image of width w to `target_height`.
std::size_t scaled_width(std::size_t height, std::size_t width, std::size_t target_height);

/// Bilinear rescale to `target_height` rows, ink-high intensities in [0,1],
/// returned width-major as [W', H].
Tensor preprocess(const GrayImage& image, std::size_t target_height);

struct Batch {
    Tensor images;  // [B, W_max, H], padding is 0 (background after inversion)
    Lengths true_widths;
    std::vector<Label> labels;
    std::vector<std::size_t> label_lengths;

    std::size_t size() const { return labels.size(); }
};

/// Optional TACo (on the raw image, before preprocessing), preprocess,
/// right-pad and encode. Each sample gets its own stream derived from one
/// draw of `rng` and its batch position.
Batch make_batch(const std::vector<const Sample*>& samples, const Vocabulary& vocab, std::size_t target_height,
                 const TacoConfig* taco, Rng& rng);

inline constexpr std::size_t kDefaultLongLineGap = 16;

/// Stacks two randomly drawn samples side by side with a background gap; the
/// second image is rescaled to the first one's height. Labels are joined by
/// a single space.
std::vector<Sample> synth_long_lines(const std::vector<Sample>& samples, std::size_t count, std::size_t gap, Rng& rng);

/// Prefix of a seeded permutation, size floor(fraction * N). Subsets for
/// smaller fractions are prefixes of larger ones under the same seed.
std::vector<Sample> few_shot_subset(const std::vector<Sample>& samples, double fraction, std::uint64_t seed);

/// Seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace easter
