#pragma once

// Exhaustive reference implementations shared by the unit suites and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <utility>
#include <vector>

#include "ino/metrics/mask_raster.hpp"
#include "ino/propagation/propagate.hpp"
#include "support.hpp"

namespace ino::test {

inline FeatureMap<double> random_features(Rng& rng, std::size_t h, std::size_t w, std::size_t d, std::size_t palette = 0) {
    FeatureMap<double> f{h, w, d, std::vector<double>(h * w * d), 0};
    // palette > 0 draws cells from a few shared vectors to force ties
    std::vector<std::vector<double>> pal;
    for (std::size_t p = 0; p < palette; ++p) {
        std::vector<double> v(d);
        for (auto& e : v) e = rng.normal();
        pal.push_back(v);
    }
    for (std::size_t i = 0; i < h * w; ++i) {
        std::vector<double> v(d);
        if (palette > 0) {
            v = pal[rng.below(palette)];
        } else {
            for (auto& e : v) e = rng.normal();
        }
        double n = 0;
        for (double e : v) n += e * e;
        n = std::sqrt(n);
        for (std::size_t k = 0; k < d; ++k) f.values[i * d + k] = v[k] / n;
    }
    return f;
}

inline LabelMap<double> random_soft_labels(Rng& rng, std::size_t h, std::size_t w, std::size_t classes) {
    LabelMap<double> l{h, w, classes, std::vector<double>(h * w * classes)};
    for (std::size_t i = 0; i < h * w; ++i) {
        auto p = random_distribution(rng, classes);
        std::copy(p.begin(), p.end(), l.probs.begin() + static_cast<long>(i * classes));
    }
    return l;
}

// Exhaustive reference: score every context cell, filter by window, full sort.
inline LabelMap<double> brute_force(const FeatureMap<double>& target, const std::vector<ContextEntry<double>>& ctx, std::size_t k,
                             std::size_t radius, double tau) {
    const std::size_t h = target.height, w = target.width, d = target.dim, nc = ctx[0].labels->classes;
    LabelMap<double> out{h, w, nc, std::vector<double>(h * w * nc, 0.0)};
    struct Hit {
        double s;
        std::size_t c, cell;
    };
    for (std::size_t i = 0; i < h * w; ++i) {
        const long ty = static_cast<long>(i / w), tx = static_cast<long>(i % w);
        std::vector<Hit> all;
        for (std::size_t c = 0; c < ctx.size(); ++c) {
            for (std::size_t j = 0; j < h * w; ++j) {
                const long cy = static_cast<long>(j / w), cx = static_cast<long>(j % w);
                if (std::max(std::labs(cy - ty), std::labs(cx - tx)) > static_cast<long>(radius)) continue;
                double s = 0;
                for (std::size_t e = 0; e < d; ++e) s += target.values[i * d + e] * ctx[c].features->values[j * d + e];
                all.push_back({s, c, j});
            }
        }
        std::sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
            if (a.s != b.s) return a.s > b.s;
            if (a.c != b.c) return a.c > b.c;
            return a.cell < b.cell;
        });
        all.resize(std::min(all.size(), k));
        std::vector<double> wts;
        double z = 0;
        for (const auto& hit : all) {
            wts.push_back(std::exp((hit.s - all[0].s) / tau));
            z += wts.back();
        }
        double* o = out.probs.data() + i * nc;
        for (std::size_t n = 0; n < all.size(); ++n) {
            const double* lab = ctx[all[n].c].labels->probs.data() + all[n].cell * nc;
            const double wn = wts[n] / z;
            for (std::size_t c = 0; c < nc; ++c) o[c] += wn * lab[c];
        }
        double s = 0;
        for (std::size_t c = 0; c < nc; ++c) s += o[c];
        for (std::size_t c = 0; c < nc; ++c) o[c] /= s;
    }
    return out;
}

// Boundary as a point list and an exhaustive nearest-distance match.
inline std::vector<std::pair<long, long>> boundary_points(const MaskRaster& m, std::uint8_t id) {
    std::vector<std::pair<long, long>> pts;
    const long h = static_cast<long>(m.height), w = static_cast<long>(m.width);
    auto fg = [&](long y, long x) { return y >= 0 && x >= 0 && y < h && x < w && m.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) == id; };
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x)
            if (fg(y, x) && (!fg(y - 1, x) || !fg(y + 1, x) || !fg(y, x - 1) || !fg(y, x + 1))) pts.emplace_back(y, x);
    return pts;
}

inline double matched_fraction(const std::vector<std::pair<long, long>>& a, const std::vector<std::pair<long, long>>& b, double tol) {
    std::size_t hit = 0;
    for (auto [ay, ax] : a) {
        double best = 1e300;
        for (auto [by, bx] : b) best = std::min(best, std::hypot(double(ay - by), double(ax - bx)));
        hit += best <= tol;
    }
    return static_cast<double>(hit) / static_cast<double>(a.size());
}

inline double f_oracle(const MaskRaster& pred, const MaskRaster& truth, double tol) {
    const auto pb = boundary_points(pred, 1), tb = boundary_points(truth, 1);
    if (pb.empty() && tb.empty()) return 1.0;
    if (pb.empty() || tb.empty()) return 0.0;
    const double p = matched_fraction(pb, tb, tol), r = matched_fraction(tb, pb, tol);
    return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

}  // namespace ino::test
