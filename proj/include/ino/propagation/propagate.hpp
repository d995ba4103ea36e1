#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ino/metrics/mask_raster.hpp"
#include "ino/numerics/tensor.hpp"
#include "ino/util/log.hpp"

namespace ino {

struct PropagationConfig {
    std::size_t top_k = 5;
    std::size_t context_frames = 10;
    std::size_t radius = 40;  // Chebyshev radius on the feature grid
    double temperature = 0.07;
    std::size_t threads = 1;

    void validate() const {
        if (top_k < 1) throw std::invalid_argument("propagation: top_k must be >= 1");
        if (radius < 1) throw std::invalid_argument("propagation: radius must be >= 1");
        if (!(temperature > 0)) throw std::invalid_argument("propagation: temperature must be positive");
    }
};

/// h x w grid of unit-norm feature vectors, row-major.
template <class T>
struct FeatureMap {
    std::size_t height = 0, width = 0, dim = 0;
    std::vector<T> values;
    std::size_t frame = 0;

    const T* cell(std::size_t i) const { return values.data() + i * dim; }

    static FeatureMap from_tensor(const Tensor<T>& grid, std::size_t frame = 0) {
        if (grid.rank() != 3) throw ShapeError("FeatureMap: expected [h,w,D], got " + shape_str(grid.shape()));
        return {grid.dim(0), grid.dim(1), grid.dim(2), std::vector<T>(grid.data().begin(), grid.data().end()), frame};
    }
};

/// h x w grid of class-probability vectors (class 0 = background).
template <class T>
struct LabelMap {
    std::size_t height = 0, width = 0, classes = 0;
    std::vector<T> probs;

    const T* cell(std::size_t i) const { return probs.data() + i * classes; }

    bool operator==(const LabelMap&) const = default;
};

/// Downsamples a mask to the feature grid by per-cell majority vote (ties
/// to the lower id) and one-hot encodes it.
template <class T>
LabelMap<T> init_labels(const MaskRaster& mask, std::size_t grid_h, std::size_t grid_w, std::size_t classes = 0) {
    if (mask.height == 0 || mask.width == 0 || grid_h == 0 || grid_w == 0) throw std::invalid_argument("init_labels: empty mask or grid");
    if (grid_h > mask.height || grid_w > mask.width) throw std::invalid_argument("init_labels: grid finer than mask");
    if (classes == 0) classes = static_cast<std::size_t>(mask.max_id()) + 1;
    if (mask.max_id() >= classes) throw std::invalid_argument("init_labels: object id exceeds class count");
    LabelMap<T> out{grid_h, grid_w, classes, std::vector<T>(grid_h * grid_w * classes, T(0))};
    std::vector<std::size_t> votes(classes);
    for (std::size_t gy = 0; gy < grid_h; ++gy) {
        const std::size_t y0 = gy * mask.height / grid_h, y1 = (gy + 1) * mask.height / grid_h;
        for (std::size_t gx = 0; gx < grid_w; ++gx) {
            const std::size_t x0 = gx * mask.width / grid_w, x1 = (gx + 1) * mask.width / grid_w;
            std::fill(votes.begin(), votes.end(), 0);
            for (std::size_t y = y0; y < y1; ++y)
                for (std::size_t x = x0; x < x1; ++x) ++votes[mask.at(y, x)];
            const auto best = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
            out.probs[(gy * grid_w + gx) * classes + best] = T(1);
        }
    }
    return out;
}

template <class T>
struct ContextEntry {
    const FeatureMap<T>* features;
    const LabelMap<T>* labels;
};

/// A scored reference cell. Ordering: higher similarity first, then the more
/// recent context entry (larger index), then the lower row-major cell.
template <class T>
struct Candidate {
    T similarity;
    std::size_t context;
    std::size_t cell;
};

template <class T>
bool candidate_before(const Candidate<T>& a, const Candidate<T>& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.context != b.context) return a.context > b.context;
    return a.cell < b.cell;
}

/// Temperature softmax over the selected similarities, weighted sum of their
/// label vectors, renormalized to sum to one. `selected` must be sorted.
template <class T>
void combine_labels(const std::vector<Candidate<T>>& selected, const std::vector<ContextEntry<T>>& context, T temperature,
                    T* out, std::size_t classes) {
    std::fill(out, out + classes, T(0));
    const T top = selected.front().similarity;
    std::vector<T> w(selected.size());
    T z = 0;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        w[i] = std::exp((selected[i].similarity - top) / temperature);
        z += w[i];
    }
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const T* lab = context[selected[i].context].labels->cell(selected[i].cell);
        const T wi = w[i] / z;
        for (std::size_t c = 0; c < classes; ++c) out[c] += wi * lab[c];
    }
    T s = 0;
    for (std::size_t c = 0; c < classes; ++c) s += out[c];
    for (std::size_t c = 0; c < classes; ++c) out[c] /= s;
}

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

/// Labels one target frame from its context with restricted attention: each
/// target cell scores every context cell within Chebyshev distance `radius`
/// of its own coordinate, keeps the global top_k, and mixes their labels.
template <class T>
LabelMap<T> propagate_frame(const FeatureMap<T>& target, const std::vector<ContextEntry<T>>& context, const PropagationConfig& cfg) {
    cfg.validate();
    if (context.empty()) throw std::invalid_argument("propagate_frame: empty context");
    const std::size_t h = target.height, w = target.width, classes = context[0].labels->classes;
    for (const auto& c : context) {
        if (c.features->height != h || c.features->width != w || c.features->dim != target.dim || c.labels->height != h ||
            c.labels->width != w || c.labels->classes != classes) {
            throw ShapeError("propagate_frame: context grids differ from the target grid");
        }
    }
    LabelMap<T> out{h, w, classes, std::vector<T>(h * w * classes, T(0))};
    const T tau = static_cast<T>(cfg.temperature);
    const long r = static_cast<long>(cfg.radius);
    std::vector<std::uint8_t> short_of_k(h * w, 0);

    auto run_rows = [&](std::size_t row_begin, std::size_t row_end) {
        std::vector<Candidate<T>> best;
        best.reserve(cfg.top_k + 1);
        for (std::size_t y = row_begin; y < row_end; ++y) {
            const std::size_t ylo = static_cast<std::size_t>(std::max(0L, static_cast<long>(y) - r));
            const std::size_t yhi = static_cast<std::size_t>(std::min(static_cast<long>(h) - 1, static_cast<long>(y) + r));
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t xlo = static_cast<std::size_t>(std::max(0L, static_cast<long>(x) - r));
                const std::size_t xhi = static_cast<std::size_t>(std::min(static_cast<long>(w) - 1, static_cast<long>(x) + r));
                const T* q = target.cell(y * w + x);
                best.clear();
                for (std::size_t c = 0; c < context.size(); ++c) {
                    const auto& fm = *context[c].features;
                    for (std::size_t cy = ylo; cy <= yhi; ++cy) {
                        for (std::size_t cx = xlo; cx <= xhi; ++cx) {
                            const std::size_t cell = cy * w + cx;
                            Candidate<T> cand{dot(q, fm.cell(cell), target.dim), c, cell};
                            if (best.size() == cfg.top_k && !candidate_before(cand, best.back())) continue;
                            auto pos = std::upper_bound(best.begin(), best.end(), cand, candidate_before<T>);
                            best.insert(pos, cand);
                            if (best.size() > cfg.top_k) best.pop_back();
                        }
                    }
                }
                if (best.size() < cfg.top_k) short_of_k[y * w + x] = 1;
                combine_labels(best, context, tau, out.probs.data() + (y * w + x) * classes, classes);
            }
        }
    };

    const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.threads, h));
    if (threads == 1) {
        run_rows(0, h);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run_rows, t * h / threads, (t + 1) * h / threads);
        for (auto& th : pool) th.join();
    }
    if (std::find(short_of_k.begin(), short_of_k.end(), 1) != short_of_k.end()) {
        log(LogLevel::debug, "propagate_frame: fewer than top_k candidates for some cells, using all available");
    }
    return out;
}

/// Sequential propagation. Frame t uses the first frame (ground-truth labels)
/// plus the up to `context_frames` most recent predicted frames (soft labels).
/// Element 0 of the result is the initial label map.
template <class T>
std::vector<LabelMap<T>> propagate_video(const std::vector<FeatureMap<T>>& frames, const LabelMap<T>& first,
                                         const PropagationConfig& cfg) {
    if (frames.empty()) throw std::invalid_argument("propagate_video: no frames");
    std::vector<LabelMap<T>> out{first};
    for (std::size_t t = 1; t < frames.size(); ++t) {
        std::vector<ContextEntry<T>> ctx{{&frames[0], &out[0]}};
        const std::size_t begin = t > cfg.context_frames ? t - cfg.context_frames : 1;
        for (std::size_t s = std::max<std::size_t>(begin, 1); s < t; ++s) ctx.push_back({&frames[s], &out[s]});
        out.push_back(propagate_frame(frames[t], ctx, cfg));
    }
    return out;
}

/// Per-cell argmax (ties to the lower id) upsampled to pixel resolution by
/// nearest neighbour.
template <class T>
MaskRaster hard_mask(const LabelMap<T>& labels, std::size_t height, std::size_t width) {
    MaskRaster m(height, width);
    for (std::size_t y = 0; y < height; ++y) {
        const std::size_t gy = y * labels.height / height;
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t gx = x * labels.width / width;
            const T* p = labels.cell(gy * labels.width + gx);
            m.at(y, x) = static_cast<std::uint8_t>(std::max_element(p, p + labels.classes) - p);
        }
    }
    return m;
}

}  // namespace ino
