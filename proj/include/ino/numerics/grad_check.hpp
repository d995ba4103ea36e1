#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "ino/numerics/rng.hpp"
#include "ino/numerics/tensor.hpp"

namespace ino {

struct GradCheckEntry {
    std::size_t input = 0;  // which tensor
    std::size_t index = 0;  // flat coordinate
    double analytic = 0;
    double numeric = 0;
    double rel_error = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0;  // worst single coordinate
    double max_abs_error = 0;
    // Per input tensor: |a - n|_2 / max(|a|_2, |n|_2, floor) over the
    // checked coordinates, and the worst of these.
    std::vector<double> tensor_rel_error;
    double max_tensor_rel_error = 0;

    bool passes(double threshold) const { return max_tensor_rel_error < threshold; }
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps
/// coordinates whose true derivative is ~0 from dominating.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

struct GradCheckOptions {
    double h = 1e-3;
    double floor = 1e-6;
    // Coordinates checked per input; nullopt checks all of them.
    std::optional<std::size_t> max_coords_per_input;
    std::uint64_t seed = 0;
};

/// Compares the reverse-mode gradient of a scalar function against central
/// differences, perturbing each input coordinate in place.
inline GradCheckReport grad_check(const std::function<Tensor<double>()>& f, std::vector<Tensor<double>> inputs,
                                  const GradCheckOptions& opt = {}) {
    for (auto& x : inputs) {
        x.set_requires_grad(true);
        x.zero_grad();
    }
    const Tensor<double> root = f();
    if (root.numel() != 1) throw ShapeError("grad_check: function must return a scalar");
    if (!std::isfinite(root.item())) throw NumericError("grad_check: non-finite function value");
    backward(root);

    GradCheckReport report;
    Rng rng(opt.seed);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& x = inputs[k];
        std::vector<double> analytic(x.numel(), 0.0);
        if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

        std::vector<std::size_t> coords(x.numel());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        if (opt.max_coords_per_input && coords.size() > *opt.max_coords_per_input) {
            for (std::size_t i = 0; i < *opt.max_coords_per_input; ++i) {
                std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
            }
            coords.resize(*opt.max_coords_per_input);
            std::sort(coords.begin(), coords.end());
        }
        double diff2 = 0, a2 = 0, n2 = 0;
        for (std::size_t i : coords) {
            auto data = x.mutable_data();
            const double orig = data[i];
            data[i] = orig + opt.h;
            const double fp = f().item();
            data[i] = orig - opt.h;
            const double fm = f().item();
            data[i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm)) throw NumericError("grad_check: non-finite function value");
            const double numeric = (fp - fm) / (2.0 * opt.h);
            GradCheckEntry e{k, i, analytic[i], numeric, relative_error(analytic[i], numeric, opt.floor)};
            report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
            report.max_abs_error = std::max(report.max_abs_error, std::abs(e.analytic - e.numeric));
            report.entries.push_back(e);
            diff2 += (e.analytic - e.numeric) * (e.analytic - e.numeric);
            a2 += e.analytic * e.analytic;
            n2 += e.numeric * e.numeric;
        }
        const double t = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), opt.floor});
        report.tensor_rel_error.push_back(t);
        report.max_tensor_rel_error = std::max(report.max_tensor_rel_error, t);
    }
    return report;
}

}  // namespace ino
