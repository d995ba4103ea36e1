#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ino {

/// Integer object-id raster; 0 is background.
struct MaskRaster {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> ids;

    MaskRaster() = default;
    MaskRaster(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), ids(h * w, fill) {}

    std::uint8_t at(std::size_t y, std::size_t x) const { return ids[y * width + x]; }
    std::uint8_t& at(std::size_t y, std::size_t x) { return ids[y * width + x]; }

    std::uint8_t max_id() const {
        std::uint8_t m = 0;
        for (auto v : ids) m = v > m ? v : m;
        return m;
    }

    bool same_shape(const MaskRaster& o) const { return height == o.height && width == o.width; }

    bool operator==(const MaskRaster&) const = default;
};

inline void require_same_raster_shape(const MaskRaster& a, const MaskRaster& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.height) + "x" +
                                    std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
    }
}

}  // namespace ino
