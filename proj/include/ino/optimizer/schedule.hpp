#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>

namespace ino {

struct OptimizerConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double warmup_epochs = 5;
    double total_epochs = 25;
    double wd_start = 0.04;
    double wd_end = 0.4;
    double lr_scale = 0.003;       // base lr = lr_scale * batch * L / 1024
    double final_lr_ratio = 1e-6;  // cosine floor as a fraction of base lr
    std::size_t batch_size = 16;
    std::size_t clip_length = 4;
    std::size_t steps_per_epoch = 1;

    std::size_t warmup_steps() const { return static_cast<std::size_t>(std::llround(warmup_epochs * static_cast<double>(steps_per_epoch))); }
    std::size_t total_steps() const { return static_cast<std::size_t>(std::llround(total_epochs * static_cast<double>(steps_per_epoch))); }

    void validate() const {
        if (!(warmup_epochs >= 0 && warmup_epochs < total_epochs)) throw std::invalid_argument("optim: warmup_epochs must lie in [0, total_epochs)");
        if (!(lr_scale > 0) || !(eps > 0) || !(wd_start >= 0) || !(wd_end >= 0)) throw std::invalid_argument("optim: rates must be positive");
        if (batch_size == 0 || clip_length == 0 || steps_per_epoch == 0) throw std::invalid_argument("optim: batch, clip length and steps per epoch must be positive");
        if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("optim: betas must lie in [0, 1)");
    }
};

/// Linear scaling rule.
inline double base_lr(double lr_scale, std::size_t batch_size, std::size_t clip_length) {
    return lr_scale * static_cast<double>(batch_size) * static_cast<double>(clip_length) / 1024.0;
}

inline double base_lr(const OptimizerConfig& c) { return base_lr(c.lr_scale, c.batch_size, c.clip_length); }

/// Half-cosine interpolation weight: 0 at progress 0, 1 at progress 1.
inline double cosine_weight(double progress) {
    return 0.5 * (1.0 - std::cos(std::numbers::pi * std::clamp(progress, 0.0, 1.0)));
}

/// Linear warmup 0 -> base, then half-cosine base -> final_lr_ratio * base.
/// Steps past the schedule return the final value.
inline double lr_at(std::size_t step, const OptimizerConfig& c) {
    const double base = base_lr(c);
    const double final_lr = c.final_lr_ratio * base;
    const std::size_t warm = c.warmup_steps();
    const std::size_t total = c.total_steps();
    if (step >= total) return final_lr;
    if (step < warm) return base * static_cast<double>(step) / static_cast<double>(warm);
    const double w = cosine_weight(static_cast<double>(step - warm) / static_cast<double>(total - warm));
    return (1.0 - w) * base + w * final_lr;
}

/// Half-cosine wd_start -> wd_end over the whole schedule (no warmup).
inline double wd_at(std::size_t step, const OptimizerConfig& c) {
    const std::size_t total = c.total_steps();
    const double w = cosine_weight(static_cast<double>(std::min(step, total)) / static_cast<double>(total));
    return (1.0 - w) * c.wd_start + w * c.wd_end;
}

}  // namespace ino
