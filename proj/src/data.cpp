#include "easter/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "easter/error.hpp"

namespace easter {

std::vector<Sample> load_manifest(const std::filesystem::path& path, const Vocabulary* vocab,
                                  const std::string& split) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    const auto base = path.parent_path();
    std::vector<Sample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw DataError(where + "expected <image-path>\\t<transcription>");
        Sample s;
        s.image_path = line.substr(0, tab);
        s.transcription = line.substr(tab + 1);
        s.split = split;
        if (s.image_path.empty()) throw DataError(where + "empty image path");
        if (s.transcription.empty()) throw DataError(where + "empty transcription");
        if (s.image_path.is_relative()) s.image_path = base / s.image_path;
        try {
            const auto text = utf8_decode(s.transcription);
            if (vocab) vocab->encode(text);
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

GrayImage load_sample_image(const Sample& sample) {
    if (sample.image) return *sample.image;
    return read_pgm(sample.image_path);
}

void preload_images(std::vector<Sample>& samples) {
    for (auto& s : samples) {
        if (!s.image) s.image = read_pgm(s.image_path);
    }
}

std::size_t scaled_width(std::size_t height, std::size_t width, std::size_t target_height) {
    const double w = std::round(static_cast<double>(width) * static_cast<double>(target_height) /
                                static_cast<double>(height));
    return std::max<std::size_t>(1, static_cast<std::size_t>(w));
}

Tensor preprocess(const GrayImage& image, std::size_t target_height) {
    if (image.height == 0 || image.width == 0) throw DataError("preprocess: zero-dimension image");
    if (target_height < 8) throw ConfigError("preprocess: target height must be at least 8");
    const std::size_t out_w = scaled_width(image.height, image.width, target_height);
    std::vector<float> resized;
    if (image.height == target_height && image.width == out_w) {
        resized.assign(image.pixels.begin(), image.pixels.end());
    } else {
        resized = resize_bilinear(image, target_height, out_w);
    }
    Tensor out({out_w, target_height});
    for (std::size_t y = 0; y < target_height; ++y) {
        for (std::size_t x = 0; x < out_w; ++x) {
            out[x * target_height + y] = 1.0f - resized[y * out_w + x] / 255.0f;
        }
    }
    return out;
}

Batch make_batch(const std::vector<const Sample*>& samples, const Vocabulary& vocab, std::size_t target_height,
                 const TacoConfig* taco, Rng& rng) {
    if (samples.empty()) contract_fail("make_batch: empty batch");
    const std::uint64_t base = rng.next_u64();
    std::vector<Tensor> frames;
    frames.reserve(samples.size());
    Batch batch;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        GrayImage img = load_sample_image(*samples[i]);
        if (taco) {
            Rng local = Rng::derive(base, i);
            img = easter::taco(img, *taco, local);
        }
        frames.push_back(preprocess(img, target_height));
        batch.labels.push_back(vocab.encode_utf8(samples[i]->transcription));
        batch.label_lengths.push_back(batch.labels.back().size());
        batch.true_widths.push_back(frames.back().dim(0));
    }
    const std::size_t w_max = *std::max_element(batch.true_widths.begin(), batch.true_widths.end());
    batch.images = Tensor({samples.size(), w_max, target_height});
    for (std::size_t i = 0; i < frames.size(); ++i) {
        std::copy(frames[i].storage().begin(), frames[i].storage().end(),
                  batch.images.raw() + i * w_max * target_height);
    }
    return batch;
}

std::vector<Sample> synth_long_lines(const std::vector<Sample>& samples, std::size_t count, std::size_t gap,
                                     Rng& rng) {
    if (samples.size() < 2) contract_fail("synth_long_lines: need at least two source samples");
    std::vector<Sample> out;
    out.reserve(count);
    const auto last = static_cast<std::int64_t>(samples.size()) - 1;
    for (std::size_t k = 0; k < count; ++k) {
        const auto& a = samples[static_cast<std::size_t>(rng.uniform_int(0, last))];
        const auto& b = samples[static_cast<std::size_t>(rng.uniform_int(0, last))];
        const GrayImage left = load_sample_image(a);
        GrayImage right = load_sample_image(b);
        if (right.height != left.height) {
            right = resize_image(right, left.height, scaled_width(right.height, right.width, left.height));
        }
        GrayImage joined(left.height, left.width + gap + right.width, kBackground);
        for (std::size_t r = 0; r < joined.height; ++r) {
            std::copy_n(&left.pixels[r * left.width], left.width, &joined.pixels[r * joined.width]);
            std::copy_n(&right.pixels[r * right.width], right.width,
                        &joined.pixels[r * joined.width + left.width + gap]);
        }
        Sample s;
        s.image_path = "long-line-" + std::to_string(k);
        s.image = std::move(joined);
        s.transcription = a.transcription + " " + b.transcription;
        s.split = "long-lines";
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

std::vector<Sample> few_shot_subset(const std::vector<Sample>& samples, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("few_shot_subset: fraction must be in (0, 1]");
    // The epsilon keeps products such as 0.29 * 100 from flooring one short.
    const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(samples.size()) + 1e-9));
    if (n == 0) throw ConfigError("few_shot_subset: fraction selects no samples");
    Rng rng(seed);
    const auto order = permutation(samples.size(), rng);
    std::vector<Sample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(samples[order[i]]);
    return out;
}

}  // namespace easter
