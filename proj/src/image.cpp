#include "easter/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "easter/error.hpp"

namespace easter {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
    for (;;) {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
}

std::size_t parse_dim(const std::string& tok, const char* what) {
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw DataError(std::string("PGM: malformed ") + what);
    }
    return static_cast<std::size_t>(std::stoul(tok));
}

}  // namespace

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    if (next_token(bytes, pos) != "P5") throw DataError("PGM: expected binary P5 magic");
    const std::size_t width = parse_dim(next_token(bytes, pos), "width");
    const std::size_t height = parse_dim(next_token(bytes, pos), "height");
    const std::size_t maxval = parse_dim(next_token(bytes, pos), "maxval");
    if (width == 0 || height == 0) throw DataError("PGM: zero-sized image");
    if (maxval == 0 || maxval > 255) throw DataError("PGM: only 8-bit images are supported");
    ++pos;  // single whitespace after maxval
    if (bytes.size() < pos + width * height) throw DataError("PGM: truncated pixel data");
    GrayImage img(height, width);
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), width * height, img.pixels.begin());
    if (maxval != 255) {
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::lround(std::min<double>(p, maxval) * 255.0 / maxval));
    }
    return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_pgm(bytes);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
    const std::string header =
        "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
    return bytes;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image " + path.string());
    const auto bytes = encode_pgm(image);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing image " + path.string());
}

std::vector<float> resize_bilinear(const GrayImage& image, std::size_t out_height, std::size_t out_width) {
    if (image.height == 0 || image.width == 0 || out_height == 0 || out_width == 0) {
        throw DataError("resize: zero-dimension image");
    }
    const double sy = static_cast<double>(image.height) / static_cast<double>(out_height);
    const double sx = static_cast<double>(image.width) / static_cast<double>(out_width);

    struct Tap {
        std::size_t lo, hi;
        double frac;
    };
    auto taps = [](std::size_t n_out, std::size_t n_in, double scale) {
        std::vector<Tap> out(n_out);
        for (std::size_t i = 0; i < n_out; ++i) {
            double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
            const auto lo = static_cast<std::size_t>(std::floor(src));
            const std::size_t hi = std::min(lo + 1, n_in - 1);
            out[i] = {lo, hi, src - static_cast<double>(lo)};
        }
        return out;
    };
    const auto ty = taps(out_height, image.height, sy);
    const auto tx = taps(out_width, image.width, sx);

    std::vector<float> out(out_height * out_width);
    for (std::size_t y = 0; y < out_height; ++y) {
        for (std::size_t x = 0; x < out_width; ++x) {
            const double top = image.at(ty[y].lo, tx[x].lo) * (1.0 - tx[x].frac) + image.at(ty[y].lo, tx[x].hi) * tx[x].frac;
            const double bot = image.at(ty[y].hi, tx[x].lo) * (1.0 - tx[x].frac) + image.at(ty[y].hi, tx[x].hi) * tx[x].frac;
            out[y * out_width + x] = static_cast<float>(top * (1.0 - ty[y].frac) + bot * ty[y].frac);
        }
    }
    return out;
}

GrayImage resize_image(const GrayImage& image, std::size_t out_height, std::size_t out_width) {
    if (image.height == out_height && image.width == out_width) return image;
    const auto values = resize_bilinear(image, out_height, out_width);
    GrayImage out(out_height, out_width);
    for (std::size_t i = 0; i < values.size(); ++i) {
        out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(values[i]), 0L, 255L));
    }
    return out;
}

}  // namespace easter
