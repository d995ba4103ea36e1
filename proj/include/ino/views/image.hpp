#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ino/metrics/mask_raster.hpp"
#include "ino/numerics/tensor.hpp"

namespace ino {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Interleaved float image, values in [0, 1].
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 3;
    std::vector<float> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w, std::size_t c = 3, float fill = 0.f)
        : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

    float at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
    float& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }

    bool operator==(const Image&) const = default;
};

template <class T>
Tensor<T> to_tensor(const Image& img) {
    std::vector<T> v(img.pixels.begin(), img.pixels.end());
    return Tensor<T>({img.height, img.width, img.channels}, std::move(v));
}

/// Bilinear sample of the source rectangle [x0, x0+w) x [y0, y0+h) onto an
/// out_h x out_w grid with half-pixel centers.
inline Image resize_region_bilinear(const Image& src, double x0, double y0, double w, double h, std::size_t out_h,
                                    std::size_t out_w) {
    Image out(out_h, out_w, src.channels);
    const double sx = w / static_cast<double>(out_w);
    const double sy = h / static_cast<double>(out_h);
    const double max_x = std::min(x0 + w, static_cast<double>(src.width)) - 1.0;
    const double max_y = std::min(y0 + h, static_cast<double>(src.height)) - 1.0;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        const double fy = std::clamp(y0 + (static_cast<double>(oy) + 0.5) * sy - 0.5, y0, max_y);
        const auto y_lo = static_cast<std::size_t>(std::floor(fy));
        const std::size_t y_hi = std::min(y_lo + 1, src.height - 1);
        const double ty = fy - static_cast<double>(y_lo);
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const double fx = std::clamp(x0 + (static_cast<double>(ox) + 0.5) * sx - 0.5, x0, max_x);
            const auto x_lo = static_cast<std::size_t>(std::floor(fx));
            const std::size_t x_hi = std::min(x_lo + 1, src.width - 1);
            const double tx = fx - static_cast<double>(x_lo);
            for (std::size_t c = 0; c < src.channels; ++c) {
                const double top = (1 - tx) * src.at(y_lo, x_lo, c) + tx * src.at(y_lo, x_hi, c);
                const double bot = (1 - tx) * src.at(y_hi, x_lo, c) + tx * src.at(y_hi, x_hi, c);
                out.at(oy, ox, c) = static_cast<float>((1 - ty) * top + ty * bot);
            }
        }
    }
    return out;
}

namespace netpbm {

inline void skip_ws_and_comments(std::istream& is) {
    for (;;) {
        int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            return;
        }
    }
}

struct Header {
    std::string magic;
    std::size_t width = 0, height = 0, maxval = 0;
};

inline Header read_header(std::istream& is, const std::filesystem::path& path) {
    Header h;
    is >> h.magic;
    skip_ws_and_comments(is);
    is >> h.width;
    skip_ws_and_comments(is);
    is >> h.height;
    skip_ws_and_comments(is);
    is >> h.maxval;
    is.get();
    if (!is || h.width == 0 || h.height == 0 || h.maxval == 0 || h.maxval > 255) {
        throw IoError("malformed netpbm header in " + path.string());
    }
    return h;
}

}  // namespace netpbm

inline void write_ppm(const std::filesystem::path& path, const Image& img) {
    if (img.channels != 3) throw IoError("write_ppm: expected 3 channels for " + path.string());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    std::vector<char> bytes(img.pixels.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(img.pixels[i], 0.f, 1.f) * 255.f)));
    }
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed for " + path.string());
}

inline Image read_ppm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    auto h = netpbm::read_header(is, path);
    if (h.magic != "P6") throw IoError("not a binary PPM (P6): " + path.string());
    Image img(h.height, h.width, 3);
    std::vector<unsigned char> bytes(img.pixels.size());
    if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
        throw IoError("truncated pixel data in " + path.string());
    }
    for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = static_cast<float>(bytes[i]) / static_cast<float>(h.maxval);
    return img;
}

inline void write_pgm(const std::filesystem::path& path, const MaskRaster& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << "P5\n" << m.width << ' ' << m.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(m.ids.data()), static_cast<std::streamsize>(m.ids.size()));
    if (!os) throw IoError("write failed for " + path.string());
}

inline MaskRaster read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    auto h = netpbm::read_header(is, path);
    if (h.magic != "P5") throw IoError("not a binary PGM (P5): " + path.string());
    MaskRaster m(h.height, h.width);
    if (!is.read(reinterpret_cast<char*>(m.ids.data()), static_cast<std::streamsize>(m.ids.size()))) {
        throw IoError("truncated pixel data in " + path.string());
    }
    return m;
}

}  // namespace ino
