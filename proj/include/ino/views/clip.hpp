#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ino/numerics/rng.hpp"
#include "ino/views/image.hpp"

namespace ino {

struct VideoClip {
    std::vector<Image> frames;
    std::string source;
    std::vector<std::size_t> indices;  // frame numbers in the source video
};

/// Zero-based frame pairs (n, L/2 + n): the first half zipped with the second.
using FramePairSet = std::vector<std::pair<std::size_t, std::size_t>>;

inline FramePairSet make_frame_pairs(std::size_t clip_length) {
    if (clip_length < 2 || clip_length % 2 != 0) {
        throw std::invalid_argument("make_frame_pairs: clip length must be even and >= 2, got " + std::to_string(clip_length));
    }
    FramePairSet pairs;
    const std::size_t half = clip_length / 2;
    for (std::size_t n = 0; n < half; ++n) pairs.emplace_back(n, half + n);
    return pairs;
}

/// L frames spaced `frameskip` apart from a uniformly drawn start.
inline VideoClip sample_clip(const std::vector<Image>& video, const std::string& source, Rng& rng, std::size_t clip_length,
                             std::size_t frameskip) {
    if (clip_length < 2 || clip_length % 2 != 0) throw std::invalid_argument("sample_clip: clip length must be even and >= 2");
    if (frameskip == 0) throw std::invalid_argument("sample_clip: frameskip must be >= 1");
    const std::size_t span = (clip_length - 1) * frameskip + 1;
    if (video.size() < span) {
        throw std::invalid_argument("sample_clip: video '" + source + "' has " + std::to_string(video.size()) +
                                    " frames, clip needs " + std::to_string(span));
    }
    const std::size_t start = rng.below(video.size() - span + 1);
    VideoClip clip;
    clip.source = source;
    for (std::size_t i = 0; i < clip_length; ++i) {
        clip.indices.push_back(start + i * frameskip);
        clip.frames.push_back(video[start + i * frameskip]);
    }
    return clip;
}

}  // namespace ino
