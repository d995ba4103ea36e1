#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ino/numerics/tensor.hpp"

namespace ino {

/// Catmull-Rom cubic convolution weight (a = -0.5).
inline double cubic_weight(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

namespace detail {

/// Four taps and weights per output coordinate, half-pixel centers,
/// indices clamped to the border.
struct CubicTaps {
    std::vector<std::array<std::size_t, 4>> index;
    std::vector<std::array<double, 4>> weight;
};

inline CubicTaps cubic_taps(std::size_t in, std::size_t out) {
    CubicTaps taps;
    taps.index.resize(out);
    taps.weight.resize(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
        const double base = std::floor(src);
        const double t = src - base;
        for (int k = 0; k < 4; ++k) {
            const long idx = static_cast<long>(base) + k - 1;
            const long clamped = std::clamp(idx, 0L, static_cast<long>(in) - 1);
            taps.index[o][k] = static_cast<std::size_t>(clamped);
            taps.weight[o][k] = cubic_weight(t - (k - 1));
        }
    }
    return taps;
}

}  // namespace detail

/// Separable bicubic resize of grid[H, W, D] to [out_h, out_w, D].
/// Resizing to the source size is an exact identity.
template <class T>
Tensor<T> bicubic_resize_2d(const Tensor<T>& grid, std::size_t out_h, std::size_t out_w) {
    if (grid.rank() != 3) throw ShapeError("bicubic_resize_2d: expected [H,W,D], got " + shape_str(grid.shape()));
    const std::size_t h = grid.dim(0), w = grid.dim(1), d = grid.dim(2);
    if (h < 2 || w < 2) throw ShapeError("bicubic_resize_2d: source extents must be >= 2, got " + shape_str(grid.shape()));
    if (out_h == 0 || out_w == 0) throw ShapeError("bicubic_resize_2d: degenerate target extent");

    auto ty = detail::cubic_taps(h, out_h);
    auto tx = detail::cubic_taps(w, out_w);
    auto src = grid.data();
    std::vector<T> out(out_h * out_w * d, T(0));
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            T* dst = out.data() + (oy * out_w + ox) * d;
            for (int ky = 0; ky < 4; ++ky) {
                for (int kx = 0; kx < 4; ++kx) {
                    const T wgt = static_cast<T>(ty.weight[oy][ky] * tx.weight[ox][kx]);
                    if (wgt == T(0)) continue;
                    const T* s = src.data() + (ty.index[oy][ky] * w + tx.index[ox][kx]) * d;
                    for (std::size_t c = 0; c < d; ++c) dst[c] += wgt * s[c];
                }
            }
        }
    }
    return Tensor<T>::make_result(
        {out_h, out_w, d}, std::move(out), {grid},
        [w, d, out_h, out_w, ty = std::move(ty), tx = std::move(tx)](detail::Node<T>& n) {
            auto& g = n.parents[0]->ensure_grad();
            for (std::size_t oy = 0; oy < out_h; ++oy) {
                for (std::size_t ox = 0; ox < out_w; ++ox) {
                    const T* go = n.grad.data() + (oy * out_w + ox) * d;
                    for (int ky = 0; ky < 4; ++ky) {
                        for (int kx = 0; kx < 4; ++kx) {
                            const T wgt = static_cast<T>(ty.weight[oy][ky] * tx.weight[ox][kx]);
                            if (wgt == T(0)) continue;
                            T* gs = g.data() + (ty.index[oy][ky] * w + tx.index[ox][kx]) * d;
                            for (std::size_t c = 0; c < d; ++c) gs[c] += wgt * go[c];
                        }
                    }
                }
            }
        });
}

}  // namespace ino
