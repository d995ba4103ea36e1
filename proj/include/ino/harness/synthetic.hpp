#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ino/numerics/rng.hpp"
#include "ino/views/video_store.hpp"

// Moving-shapes videos: 1-3 flat-colored objects drifting over a static
// textured background, bouncing off the canvas borders.

namespace ino {

enum class ShapeKind { rectangle, disc, triangle };

struct SceneObject {
    ShapeKind kind = ShapeKind::rectangle;
    double cx = 0, cy = 0;          // center at frame 0, pixels
    double width = 8, height = 8;   // bounding box; discs use min(width, height) as diameter
    double vx = 0, vy = 0;          // pixels per frame
    float color[3] = {1.f, 0.f, 0.f};
};

struct SyntheticSceneSpec {
    std::size_t height = 32, width = 32;
    std::size_t frames = 16;
    std::vector<SceneObject> objects;
    std::uint64_t texture_seed = 0;

    void validate() const {
        if (height < 4 || width < 4) throw std::invalid_argument("scene: canvas must be at least 4x4");
        if (frames == 0) throw std::invalid_argument("scene: frame count must be positive");
        if (objects.empty() || objects.size() > 3) throw std::invalid_argument("scene: 1 to 3 objects required");
        for (const auto& o : objects) {
            if (!(o.width >= 1 && o.height >= 1) || o.width > static_cast<double>(width) || o.height > static_cast<double>(height)) {
                throw std::invalid_argument("scene: object size must fit the canvas");
            }
        }
    }
};

/// Folds p into [lo, hi] by reflecting at both ends.
inline double reflect_into(double p, double lo, double hi) {
    const double len = hi - lo;
    if (len <= 0) return lo;
    double u = std::fmod(p - lo, 2 * len);
    if (u < 0) u += 2 * len;
    return lo + (u > len ? 2 * len - u : u);
}

/// Object center at frame t; the whole bounding box stays on the canvas.
inline std::pair<double, double> object_center(const SceneObject& o, const SyntheticSceneSpec& s, std::size_t t) {
    const double td = static_cast<double>(t);
    const double x = reflect_into(o.cx + o.vx * td, o.width / 2, static_cast<double>(s.width) - o.width / 2);
    const double y = reflect_into(o.cy + o.vy * td, o.height / 2, static_cast<double>(s.height) - o.height / 2);
    return {x, y};
}

/// Pixel-center coverage test.
inline bool covers(const SceneObject& o, double cx, double cy, double px, double py) {
    const double dx = px - cx, dy = py - cy;
    switch (o.kind) {
        case ShapeKind::rectangle:
            return dx >= -o.width / 2 && dx < o.width / 2 && dy >= -o.height / 2 && dy < o.height / 2;
        case ShapeKind::disc: {
            const double r = std::min(o.width, o.height) / 2;
            return dx * dx + dy * dy <= r * r;
        }
        case ShapeKind::triangle: {
            // Apex up, base along the bottom of the bounding box.
            if (dy < -o.height / 2 || dy >= o.height / 2) return false;
            const double frac = (dy + o.height / 2) / o.height;
            return std::abs(dx) <= frac * o.width / 2;
        }
    }
    return false;
}

namespace synthetic_detail {

inline float hash_noise(std::uint64_t seed, std::int64_t a, std::int64_t b, std::uint64_t c) {
    Rng r(seed ^ (static_cast<std::uint64_t>(a) * 0x9E3779B97F4A7C15ULL) ^ (static_cast<std::uint64_t>(b) * 0xC2B2AE3D27D4EB4FULL) ^ c);
    return static_cast<float>(r.uniform());
}

inline void hsv_to_rgb(double h, double s, double v, float out[3]) {
    const double c = v * s, hp = h * 6.0, x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
    double r = 0, g = 0, b = 0;
    if (hp < 1) r = c, g = x;
    else if (hp < 2) r = x, g = c;
    else if (hp < 3) g = c, b = x;
    else if (hp < 4) g = x, b = c;
    else if (hp < 5) r = x, b = c;
    else r = c, b = x;
    const double m = v - c;
    out[0] = static_cast<float>(r + m);
    out[1] = static_cast<float>(g + m);
    out[2] = static_cast<float>(b + m);
}

}  // namespace synthetic_detail

/// Static background: a coarse 4x4 color lattice, bilinearly upsampled, plus
/// per-pixel grain.
inline Image render_background(const SyntheticSceneSpec& s) {
    using synthetic_detail::hash_noise;
    constexpr std::size_t kLattice = 4;
    float lattice[kLattice][kLattice][3];
    for (std::size_t i = 0; i < kLattice; ++i)
        for (std::size_t j = 0; j < kLattice; ++j)
            for (std::size_t c = 0; c < 3; ++c)
                lattice[i][j][c] = 0.3f + 0.3f * hash_noise(s.texture_seed, static_cast<std::int64_t>(i), static_cast<std::int64_t>(j), c + 1);
    Image img(s.height, s.width, 3);
    for (std::size_t y = 0; y < s.height; ++y) {
        const double fy = (static_cast<double>(y) + 0.5) / static_cast<double>(s.height) * (kLattice - 1);
        const std::size_t y0 = std::min<std::size_t>(static_cast<std::size_t>(fy), kLattice - 2);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < s.width; ++x) {
            const double fx = (static_cast<double>(x) + 0.5) / static_cast<double>(s.width) * (kLattice - 1);
            const std::size_t x0 = std::min<std::size_t>(static_cast<std::size_t>(fx), kLattice - 2);
            const double wx = fx - static_cast<double>(x0);
            const float grain = 0.08f * (hash_noise(s.texture_seed, static_cast<std::int64_t>(y), static_cast<std::int64_t>(x), 17) - 0.5f);
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = (1 - wy) * ((1 - wx) * lattice[y0][x0][c] + wx * lattice[y0][x0 + 1][c]) +
                                 wy * ((1 - wx) * lattice[y0 + 1][x0][c] + wx * lattice[y0 + 1][x0 + 1][c]);
                img.at(y, x, c) = std::clamp(static_cast<float>(v) + grain, 0.f, 1.f);
            }
        }
    }
    return img;
}

/// Frame t and its object-id mask. Later objects are drawn on top and own
/// the overlapping pixels.
inline std::pair<Image, MaskRaster> render_frame(const SyntheticSceneSpec& s, const Image& background, std::size_t t) {
    Image img = background;
    MaskRaster mask(s.height, s.width);
    for (std::size_t k = 0; k < s.objects.size(); ++k) {
        const auto& o = s.objects[k];
        const auto [cx, cy] = object_center(o, s, t);
        for (std::size_t y = 0; y < s.height; ++y) {
            for (std::size_t x = 0; x < s.width; ++x) {
                const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
                if (!covers(o, cx, cy, px, py)) continue;
                // Texture fixed to the object so it moves with it.
                const auto ox = static_cast<std::int64_t>(std::floor((px - cx) / 2));
                const auto oy = static_cast<std::int64_t>(std::floor((py - cy) / 2));
                const float tex = 0.12f * (synthetic_detail::hash_noise(s.texture_seed + k + 1, oy, ox, 31) - 0.5f);
                for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = std::clamp(o.color[c] + tex, 0.f, 1.f);
                mask.at(y, x) = static_cast<std::uint8_t>(k + 1);
            }
        }
    }
    return {std::move(img), std::move(mask)};
}

inline Video render_video(const SyntheticSceneSpec& s, const std::string& id, bool with_masks) {
    s.validate();
    const Image bg = render_background(s);
    Video v;
    v.id = id;
    for (std::size_t t = 0; t < s.frames; ++t) {
        auto [img, mask] = render_frame(s, bg, t);
        v.frames.push_back(std::move(img));
        if (with_masks) v.masks.push_back(std::move(mask));
    }
    return v;
}

/// Random scene: 1-3 objects of random kind, size 20-40% of the canvas,
/// speed up to 1.5 px/frame per axis, saturated colors.
inline SyntheticSceneSpec random_scene_spec(Rng& rng, std::size_t height, std::size_t width, std::size_t frames) {
    SyntheticSceneSpec s;
    s.height = height;
    s.width = width;
    s.frames = frames;
    s.texture_seed = rng.next_u64();
    const std::size_t n = 1 + rng.below(3);
    const double hue0 = rng.uniform();
    for (std::size_t k = 0; k < n; ++k) {
        SceneObject o;
        o.kind = static_cast<ShapeKind>(rng.below(3));
        o.width = std::round(rng.uniform(0.2, 0.4) * static_cast<double>(width));
        o.height = std::round(rng.uniform(0.2, 0.4) * static_cast<double>(height));
        o.cx = rng.uniform(o.width / 2, static_cast<double>(width) - o.width / 2);
        o.cy = rng.uniform(o.height / 2, static_cast<double>(height) - o.height / 2);
        o.vx = rng.uniform(-1.5, 1.5);
        o.vy = rng.uniform(-1.5, 1.5);
        const double hue = std::fmod(hue0 + static_cast<double>(k) / static_cast<double>(n) + rng.uniform(-0.05, 0.05) + 1.0, 1.0);
        synthetic_detail::hsv_to_rgb(hue, rng.uniform(0.7, 1.0), rng.uniform(0.75, 1.0), o.color);
        s.objects.push_back(o);
    }
    return s;
}

struct SyntheticDatasetConfig {
    std::size_t train_videos = 8;
    std::size_t eval_videos = 4;
    std::size_t train_frames = 16;
    std::size_t eval_frames = 10;
    std::size_t height = 32, width = 32;
};

struct SyntheticDatasetPaths {
    std::filesystem::path train_index;
    std::filesystem::path eval_index;
};

/// Writes <out>/train/video_NNN (frames only) and <out>/eval/video_NNN
/// (frames and masks), each split with its own videos.txt.
inline SyntheticDatasetPaths gen_synthetic_dataset(const SyntheticDatasetConfig& cfg, const Rng& rng, const std::filesystem::path& out) {
    auto write_split = [&](const char* split, std::size_t count, std::size_t frames, bool masks) {
        Rng split_rng = rng.split(split);
        const auto dir = out / split;
        std::vector<std::string> entries;
        for (std::size_t i = 0; i < count; ++i) {
            Rng video_rng = split_rng.split(i);
            char id_buf[32];
            std::snprintf(id_buf, sizeof(id_buf), "video_%03zu", i);
            const std::string id = id_buf;
            const auto spec = random_scene_spec(video_rng, cfg.height, cfg.width, frames);
            write_video(dir / id, render_video(spec, id, masks));
            entries.push_back(id);
        }
        write_index(dir / "videos.txt", entries);
        return dir / "videos.txt";
    };
    SyntheticDatasetPaths paths;
    paths.train_index = write_split("train", cfg.train_videos, cfg.train_frames, false);
    paths.eval_index = write_split("eval", cfg.eval_videos, cfg.eval_frames, true);
    return paths;
}

}  // namespace ino
