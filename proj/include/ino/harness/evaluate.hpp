#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ino/encoder/vit.hpp"
#include "ino/metrics/jf.hpp"
#include "ino/propagation/propagate.hpp"
#include "ino/views/video_store.hpp"

namespace ino {

/// Produces the feature grid for frame `index` of `video`.
using FeatureExtractor = std::function<FeatureMap<double>(const Video& video, std::size_t index)>;

/// Frozen-encoder features: the inference-layer patch tokens, widened to
/// double for propagation.
inline FeatureExtractor encoder_features(const EncoderParams<float>& params, const ModelConfig& model) {
    auto frozen = std::make_shared<EncoderParams<float>>(params.clone(false));
    return [frozen, model](const Video& video, std::size_t index) {
        auto grid = extract_inference_features(to_tensor<float>(video.frames[index]), *frozen, model);
        return FeatureMap<double>::from_tensor(grid.template cast<double>(), index);
    };
}

/// Propagated hard masks for every frame of one video; element 0 is the
/// first-frame annotation on the feature grid.
inline std::vector<MaskRaster> segment_video(const Video& video, const FeatureExtractor& features, const PropagationConfig& prop) {
    if (video.masks.empty()) throw std::invalid_argument("evaluate: video '" + video.id + "' has no first-frame mask");
    std::vector<FeatureMap<double>> maps;
    for (std::size_t t = 0; t < video.frames.size(); ++t) maps.push_back(features(video, t));
    std::uint8_t max_id = 0;
    for (const auto& m : video.masks) max_id = std::max(max_id, m.max_id());
    const auto first = init_labels<double>(video.masks[0], maps[0].height, maps[0].width, static_cast<std::size_t>(max_id) + 1);
    const auto labels = propagate_video(maps, first, prop);
    std::vector<MaskRaster> out;
    for (const auto& l : labels) out.push_back(hard_mask(l, video.masks[0].height, video.masks[0].width));
    return out;
}

/// Per-object J and F tracks over the frames that carry ground truth.
inline std::vector<ObjectTrack> score_video(const Video& video, const std::vector<MaskRaster>& predicted) {
    std::uint8_t max_id = 0;
    for (const auto& m : video.masks) max_id = std::max(max_id, m.max_id());
    std::vector<ObjectTrack> tracks;
    for (std::uint8_t id = 1; id <= max_id; ++id) {
        ObjectTrack t{video.id, id, {}, {}};
        for (std::size_t i = 0; i < video.masks.size() && i < predicted.size(); ++i) {
            t.j.push_back(region_similarity_J(predicted[i], video.masks[i], id));
            t.f.push_back(contour_accuracy_F(predicted[i], video.masks[i], id));
        }
        tracks.push_back(std::move(t));
    }
    return tracks;
}

inline SequenceScores evaluate_videos(const std::vector<Video>& videos, const FeatureExtractor& features, const PropagationConfig& prop) {
    std::vector<ObjectTrack> tracks;
    for (const auto& v : videos) {
        auto vt = score_video(v, segment_video(v, features, prop));
        tracks.insert(tracks.end(), vt.begin(), vt.end());
    }
    return aggregate(tracks);
}

/// Injected oracle features: a one-hot object indicator per cell (majority
/// vote over the cell's pixels), read from the ground-truth mask.
inline FeatureExtractor oracle_features(std::size_t grid_h, std::size_t grid_w) {
    return [grid_h, grid_w](const Video& video, std::size_t index) {
        if (index >= video.masks.size()) throw std::invalid_argument("oracle_features: frame without ground truth");
        std::uint8_t max_id = 0;
        for (const auto& m : video.masks) max_id = std::max(max_id, m.max_id());
        const auto onehot = init_labels<double>(video.masks[index], grid_h, grid_w, static_cast<std::size_t>(max_id) + 1);
        return FeatureMap<double>{grid_h, grid_w, onehot.classes, onehot.probs, index};
    };
}

}  // namespace ino
