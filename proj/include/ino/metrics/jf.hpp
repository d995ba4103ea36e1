#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ino/metrics/mask_raster.hpp"

namespace ino {

inline std::vector<std::uint8_t> binary_mask(const MaskRaster& m, std::uint8_t id) {
    std::vector<std::uint8_t> b(m.ids.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = m.ids[i] == id;
    return b;
}

/// Jaccard index of the object's pixels. Both empty -> 1.
inline double region_similarity_J(const MaskRaster& pred, const MaskRaster& truth, std::uint8_t id) {
    require_same_raster_shape(pred, truth, "region_similarity_J");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.ids.size(); ++i) {
        const bool p = pred.ids[i] == id, t = truth.ids[i] == id;
        inter += p && t;
        uni += p || t;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Foreground pixels with a 4-neighbour that is background or off-image.
inline std::vector<std::uint8_t> boundary_map(const std::vector<std::uint8_t>& fg, std::size_t h, std::size_t w) {
    std::vector<std::uint8_t> b(h * w, 0);
    auto is_fg = [&](long y, long x) {
        return y >= 0 && x >= 0 && y < static_cast<long>(h) && x < static_cast<long>(w) && fg[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
    };
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (!fg[y * w + x]) continue;
            const long yy = static_cast<long>(y), xx = static_cast<long>(x);
            b[y * w + x] = !is_fg(yy - 1, xx) || !is_fg(yy + 1, xx) || !is_fg(yy, xx - 1) || !is_fg(yy, xx + 1);
        }
    }
    return b;
}

/// ceil(0.008 * diagonal), at least one pixel.
inline std::size_t boundary_tolerance(std::size_t h, std::size_t w) {
    const double diag = std::sqrt(static_cast<double>(h * h + w * w));
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.008 * diag)));
}

/// Morphological dilation by a Euclidean disc of radius `tol`.
inline std::vector<std::uint8_t> dilate_disc(const std::vector<std::uint8_t>& m, std::size_t h, std::size_t w, std::size_t tol) {
    std::vector<std::uint8_t> out(h * w, 0);
    const long r = static_cast<long>(tol);
    std::vector<std::pair<long, long>> offsets;
    for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx)
            if (dy * dy + dx * dx <= r * r) offsets.emplace_back(dy, dx);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (!m[y * w + x]) continue;
            for (auto [dy, dx] : offsets) {
                const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
                if (yy >= 0 && xx >= 0 && yy < static_cast<long>(h) && xx < static_cast<long>(w)) {
                    out[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)] = 1;
                }
            }
        }
    }
    return out;
}

/// Boundary F-measure: a boundary pixel matches when the other boundary has
/// a pixel within Euclidean distance `tolerance`. tolerance 0 selects
/// boundary_tolerance() of the raster size.
inline double contour_accuracy_F(const MaskRaster& pred, const MaskRaster& truth, std::uint8_t id, std::size_t tolerance = 0) {
    require_same_raster_shape(pred, truth, "contour_accuracy_F");
    const std::size_t h = pred.height, w = pred.width;
    if (tolerance == 0) tolerance = boundary_tolerance(h, w);
    const auto pb = boundary_map(binary_mask(pred, id), h, w);
    const auto tb = boundary_map(binary_mask(truth, id), h, w);
    const auto n_pred = static_cast<std::size_t>(std::count(pb.begin(), pb.end(), 1));
    const auto n_truth = static_cast<std::size_t>(std::count(tb.begin(), tb.end(), 1));
    if (n_pred == 0 && n_truth == 0) return 1.0;
    if (n_pred == 0 || n_truth == 0) return 0.0;
    const auto pd = dilate_disc(pb, h, w, tolerance);
    const auto td = dilate_disc(tb, h, w, tolerance);
    std::size_t pred_hit = 0, truth_hit = 0;
    for (std::size_t i = 0; i < h * w; ++i) {
        pred_hit += pb[i] && td[i];
        truth_hit += tb[i] && pd[i];
    }
    const double precision = static_cast<double>(pred_hit) / static_cast<double>(n_pred);
    const double recall = static_cast<double>(truth_hit) / static_cast<double>(n_truth);
    return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

/// Per-frame scores of one object in one sequence. Index 0 is the annotated
/// first frame.
struct ObjectTrack {
    std::string sequence;
    std::uint8_t object = 1;
    std::vector<double> j;
    std::vector<double> f;
};

struct TrackScore {
    std::string sequence;
    std::uint8_t object = 1;
    double j_mean = 0;
    double f_mean = 0;
};

struct SequenceScores {
    std::vector<TrackScore> tracks;
    double j_mean = 0, f_mean = 0;
    double j_recall = 0, f_recall = 0;
    double jf_mean = 0;
};

/// Means over evaluated frames per track, then over tracks; recall is the
/// fraction of tracks whose mean exceeds 0.5.
inline SequenceScores aggregate(const std::vector<ObjectTrack>& tracks, bool skip_first_frame = true) {
    if (tracks.empty()) throw std::invalid_argument("aggregate: no tracks");
    SequenceScores s;
    const std::size_t first = skip_first_frame ? 1 : 0;
    for (const auto& t : tracks) {
        if (t.j.size() != t.f.size() || t.j.size() <= first) {
            throw std::invalid_argument("aggregate: track '" + t.sequence + "' has no evaluated frames");
        }
        TrackScore ts{t.sequence, t.object, 0, 0};
        for (std::size_t i = first; i < t.j.size(); ++i) {
            ts.j_mean += t.j[i];
            ts.f_mean += t.f[i];
        }
        const double n = static_cast<double>(t.j.size() - first);
        ts.j_mean /= n;
        ts.f_mean /= n;
        s.j_mean += ts.j_mean;
        s.f_mean += ts.f_mean;
        s.j_recall += ts.j_mean > 0.5;
        s.f_recall += ts.f_mean > 0.5;
        s.tracks.push_back(ts);
    }
    const double n = static_cast<double>(tracks.size());
    s.j_mean /= n;
    s.f_mean /= n;
    s.j_recall /= n;
    s.f_recall /= n;
    s.jf_mean = 0.5 * (s.j_mean + s.f_mean);
    return s;
}

/// Tab-separated report: one row per track, then a footer row in the order
/// J&F_m, J_m, J_r, F_m, F_r.
inline void write_report(std::ostream& os, const SequenceScores& s) {
    os << std::fixed << std::setprecision(6);
    os << "sequence\tobject\tJ_m\tF_m\n";
    for (const auto& t : s.tracks) os << t.sequence << '\t' << static_cast<int>(t.object) << '\t' << t.j_mean << '\t' << t.f_mean << '\n';
    os << "#\tJ&F_m\tJ_m\tJ_r\tF_m\tF_r\n";
    os << "global\t" << s.jf_mean << '\t' << s.j_mean << '\t' << s.j_recall << '\t' << s.f_mean << '\t' << s.f_recall << '\n';
}

}  // namespace ino
