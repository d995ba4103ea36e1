#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ino/numerics/rng.hpp"

namespace ino {

/// Boolean token mask over a grid_h x grid_w patch grid (row-major).
struct MaskPattern {
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    double ratio = 0;
    std::size_t count = 0;  // K, the number of set cells
    std::vector<std::uint8_t> cells;

    std::size_t size() const { return cells.size(); }

    std::vector<std::size_t> masked_indices() const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (cells[i]) idx.push_back(i);
        return idx;
    }

    bool operator==(const MaskPattern&) const = default;
};

inline std::size_t masked_count(std::size_t tokens, double ratio) {
    return static_cast<std::size_t>(std::lround(static_cast<double>(tokens) * ratio));
}

/// Places random rectangles (sides >= 1, aspect in (1/3, 3)) until exactly
/// `k` cells are set; the last rectangle is trimmed in row-major order.
inline MaskPattern blockwise_mask(std::size_t grid_h, std::size_t grid_w, std::size_t k, Rng& rng) {
    const std::size_t total = grid_h * grid_w;
    if (k > total) throw std::invalid_argument("blockwise_mask: K exceeds token count");
    MaskPattern m;
    m.grid_h = grid_h;
    m.grid_w = grid_w;
    m.count = k;
    m.ratio = total ? static_cast<double>(k) / static_cast<double>(total) : 0.0;
    m.cells.assign(total, 0);
    std::size_t set = 0;
    int stale = 0;
    const double log_lo = std::log(1.0 / 3.0), log_hi = std::log(3.0);
    while (set < k) {
        std::size_t bh = 1, bw = 1;
        if (stale < 100) {
            const double remaining = static_cast<double>(k - set);
            const double area = rng.uniform(1.0, std::max(1.0, remaining));
            const double aspect = std::exp(rng.uniform(log_lo, log_hi));
            bh = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(std::sqrt(area * aspect))), 1, grid_h);
            bw = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(std::sqrt(area / aspect))), 1, grid_w);
        }
        const std::size_t top = rng.below(grid_h - bh + 1);
        const std::size_t left = rng.below(grid_w - bw + 1);
        std::size_t added = 0;
        for (std::size_t y = top; y < top + bh && set < k; ++y) {
            for (std::size_t x = left; x < left + bw && set < k; ++x) {
                auto& c = m.cells[y * grid_w + x];
                if (!c) {
                    c = 1;
                    ++set;
                    ++added;
                }
            }
        }
        stale = added ? 0 : stale + 1;
    }
    return m;
}

/// Per-frame masks for one clip: a single ratio draw (so every frame has the
/// same K) and an independent pattern per frame.
inline std::vector<MaskPattern> sample_clip_masks(std::size_t frames, std::size_t grid_h, std::size_t grid_w, double ratio_min,
                                                  double ratio_max, Rng& rng) {
    const double r = rng.uniform(ratio_min, ratio_max);
    const std::size_t k = masked_count(grid_h * grid_w, r);
    std::vector<MaskPattern> out;
    for (std::size_t i = 0; i < frames; ++i) {
        out.push_back(blockwise_mask(grid_h, grid_w, k, rng));
        out.back().ratio = r;
    }
    return out;
}

inline std::size_t square_side(std::size_t tokens) {
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(tokens))));
    if (side * side != tokens) throw std::invalid_argument("mask: token count " + std::to_string(tokens) + " is not a square grid");
    return side;
}

/// Gated mask draw. Returns nullopt when the gate is off (uniform draw
/// >= gate_probability) or when K rounds to zero.
inline std::optional<MaskPattern> sample_mask(std::size_t tokens, Rng& rng, double gate_probability = 0.5, double ratio_min = 0.1,
                                              double ratio_max = 0.5) {
    const std::size_t side = square_side(tokens);
    if (rng.uniform() >= gate_probability) return std::nullopt;
    const double r = rng.uniform(ratio_min, ratio_max);
    const std::size_t k = masked_count(tokens, r);
    if (k == 0) return std::nullopt;
    auto m = blockwise_mask(side, side, k, rng);
    m.ratio = r;
    return m;
}

}  // namespace ino
