#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ino/numerics/rng.hpp"
#include "ino/util/log.hpp"
#include "ino/views/clip.hpp"
#include "ino/views/image.hpp"

namespace ino {

enum class AugmentTarget { locals, globals, both, none };

inline AugmentTarget parse_augment_target(const std::string& s) {
    if (s == "locals") return AugmentTarget::locals;
    if (s == "globals") return AugmentTarget::globals;
    if (s == "both") return AugmentTarget::both;
    if (s == "none") return AugmentTarget::none;
    throw std::invalid_argument("unknown augment target '" + s + "' (locals|globals|both|none)");
}

inline const char* to_string(AugmentTarget t) {
    switch (t) {
        case AugmentTarget::locals: return "locals";
        case AugmentTarget::globals: return "globals";
        case AugmentTarget::both: return "both";
        case AugmentTarget::none: return "none";
    }
    return "?";
}

struct ViewConfig {
    std::size_t clip_length = 4;
    std::size_t local_crops = 8;
    // Area fractions. Globals take the large range, locals the small one.
    double global_scale_min = 0.8;
    double global_scale_max = 0.95;
    double local_scale_min = 0.05;
    double local_scale_max = 0.8;
    std::size_t global_size = 64;
    std::size_t local_size = 32;
    AugmentTarget augment = AugmentTarget::locals;
    std::size_t frameskip = 8;
    double flip_probability = 0.5;
    double brightness = 0.4;
    double contrast = 0.4;
    double saturation = 0.2;
    // In-generative gating and mask ratio range.
    double gate_probability = 0.5;
    double ratio_min = 0.1;
    double ratio_max = 0.5;

    void validate() const {
        if (clip_length < 2 || clip_length % 2) throw std::invalid_argument("view: clip_length must be even and >= 2");
        if (local_crops < 1) throw std::invalid_argument("view: local_crops must be >= 1");
        auto range_ok = [](double lo, double hi) { return lo > 0.0 && lo <= hi && hi <= 1.0; };
        if (!range_ok(global_scale_min, global_scale_max)) throw std::invalid_argument("view: invalid global scale range");
        if (!range_ok(local_scale_min, local_scale_max)) throw std::invalid_argument("view: invalid local scale range");
        if (global_size == 0 || local_size == 0) throw std::invalid_argument("view: crop sizes must be positive");
        if (frameskip == 0) throw std::invalid_argument("view: frameskip must be >= 1");
        if (!(ratio_min >= 0.0 && ratio_min <= ratio_max && ratio_max <= 1.0)) throw std::invalid_argument("view: invalid mask ratio range");
        if (!(gate_probability >= 0.0 && gate_probability <= 1.0)) throw std::invalid_argument("view: gate probability outside [0,1]");
    }

    bool augments_globals() const { return augment == AugmentTarget::globals || augment == AugmentTarget::both; }
    bool augments_locals() const { return augment == AugmentTarget::locals || augment == AugmentTarget::both; }
};

/// Everything needed to re-render a crop from its source frame.
struct CropRecord {
    double x0 = 0, y0 = 0, width = 0, height = 0;
    bool flip = false;
    bool jitter = false;
    double brightness = 1, contrast = 1, saturation = 1;

    bool operator==(const CropRecord&) const = default;
};

struct CropSet {
    std::vector<Image> globals;                        // one per frame
    std::vector<std::vector<Image>> locals;            // M per frame
    std::vector<CropRecord> global_records;
    std::vector<std::vector<CropRecord>> local_records;
};

inline void color_jitter(Image& img, double brightness, double contrast, double saturation) {
    auto clamp01 = [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); };
    for (auto& p : img.pixels) p = clamp01(p * brightness);
    if (img.channels == 3) {
        double mean_gray = 0;
        const std::size_t n = img.height * img.width;
        for (std::size_t i = 0; i < n; ++i) {
            mean_gray += 0.299 * img.pixels[3 * i] + 0.587 * img.pixels[3 * i + 1] + 0.114 * img.pixels[3 * i + 2];
        }
        mean_gray /= static_cast<double>(n);
        for (auto& p : img.pixels) p = clamp01((p - mean_gray) * contrast + mean_gray);
        for (std::size_t i = 0; i < n; ++i) {
            const double g = 0.299 * img.pixels[3 * i] + 0.587 * img.pixels[3 * i + 1] + 0.114 * img.pixels[3 * i + 2];
            for (std::size_t c = 0; c < 3; ++c) img.pixels[3 * i + c] = clamp01((img.pixels[3 * i + c] - g) * saturation + g);
        }
    } else {
        double mean = 0;
        for (auto p : img.pixels) mean += p;
        mean /= static_cast<double>(img.pixels.size());
        for (auto& p : img.pixels) p = clamp01((p - mean) * contrast + mean);
    }
}

inline void flip_horizontal(Image& img) {
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width / 2; ++x)
            for (std::size_t c = 0; c < img.channels; ++c) std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
}

inline Image render_crop(const Image& frame, const CropRecord& rec, std::size_t size) {
    Image out = resize_region_bilinear(frame, rec.x0, rec.y0, rec.width, rec.height, size, size);
    if (rec.flip) flip_horizontal(out);
    if (rec.jitter) color_jitter(out, rec.brightness, rec.contrast, rec.saturation);
    return out;
}

/// Random resized crop geometry: area fraction from [scale_min, scale_max],
/// log-uniform aspect ratio in (3/4, 4/3), up to 10 attempts, then a
/// centered crop at the nearest feasible aspect ratio.
inline CropRecord sample_crop_geometry(std::size_t frame_w, std::size_t frame_h, double scale_min, double scale_max, Rng& rng) {
    const double area = static_cast<double>(frame_w * frame_h);
    const double log_lo = std::log(3.0 / 4.0), log_hi = std::log(4.0 / 3.0);
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target = area * rng.uniform(scale_min, scale_max);
        const double aspect = std::exp(rng.uniform(log_lo, log_hi));
        const auto w = static_cast<long>(std::lround(std::sqrt(target * aspect)));
        const auto h = static_cast<long>(std::lround(std::sqrt(target / aspect)));
        if (w > 0 && h > 0 && w <= static_cast<long>(frame_w) && h <= static_cast<long>(frame_h)) {
            CropRecord r;
            r.x0 = static_cast<double>(rng.below(frame_w - static_cast<std::size_t>(w) + 1));
            r.y0 = static_cast<double>(rng.below(frame_h - static_cast<std::size_t>(h) + 1));
            r.width = static_cast<double>(w);
            r.height = static_cast<double>(h);
            return r;
        }
    }
    const double in_ratio = static_cast<double>(frame_w) / static_cast<double>(frame_h);
    double w = static_cast<double>(frame_w), h = static_cast<double>(frame_h);
    if (in_ratio < 3.0 / 4.0) {
        h = std::round(w / (3.0 / 4.0));
    } else if (in_ratio > 4.0 / 3.0) {
        w = std::round(h * (4.0 / 3.0));
    }
    log(LogLevel::debug, "crop: rejection sampling failed, using center crop");
    CropRecord r;
    r.width = w;
    r.height = h;
    r.x0 = std::floor((static_cast<double>(frame_w) - w) / 2.0);
    r.y0 = std::floor((static_cast<double>(frame_h) - h) / 2.0);
    return r;
}

inline void sample_photometric(CropRecord& rec, const ViewConfig& cfg, Rng& rng) {
    rec.flip = rng.bernoulli(cfg.flip_probability);
    rec.jitter = true;
    rec.brightness = rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness);
    rec.contrast = rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast);
    rec.saturation = rng.uniform(1.0 - cfg.saturation, 1.0 + cfg.saturation);
}

/// One global and M local crops per clip frame. Geometry and photometric
/// draws use separate substreams for globals and locals, so enabling or
/// disabling augmentation on one side never perturbs the other.
inline CropSet make_crops(const VideoClip& clip, const Rng& rng, const ViewConfig& cfg) {
    cfg.validate();
    Rng global_geom = rng.split("global_geometry");
    Rng local_geom = rng.split("local_geometry");
    Rng global_photo = rng.split("global_photometric");
    Rng local_photo = rng.split("local_photometric");
    CropSet set;
    for (const auto& frame : clip.frames) {
        CropRecord g = sample_crop_geometry(frame.width, frame.height, cfg.global_scale_min, cfg.global_scale_max, global_geom);
        if (cfg.augments_globals()) sample_photometric(g, cfg, global_photo);
        set.globals.push_back(render_crop(frame, g, cfg.global_size));
        set.global_records.push_back(g);

        std::vector<Image> locals;
        std::vector<CropRecord> records;
        for (std::size_t j = 0; j < cfg.local_crops; ++j) {
            CropRecord l = sample_crop_geometry(frame.width, frame.height, cfg.local_scale_min, cfg.local_scale_max, local_geom);
            if (cfg.augments_locals()) sample_photometric(l, cfg, local_photo);
            locals.push_back(render_crop(frame, l, cfg.local_size));
            records.push_back(l);
        }
        set.locals.push_back(std::move(locals));
        set.local_records.push_back(std::move(records));
    }
    return set;
}

}  // namespace ino
