#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ino/numerics/grad_check.hpp"
#include "ino/objectives/ino_objective.hpp"
#include "ino/views/masking.hpp"

// Finite-difference check of every loss term on a tiny double-precision
// model: L = 2, M = 2, 2x2 token grid, D = 8, k = 16, depth 1.

namespace ino {

struct MicroProblem {
    ModelConfig model;
    TemperatureConfig temps;
    EncoderParams<double> student;
    TeacherState<double> teacher;
    std::vector<ClipViews<double>> batch;
};

inline ModelConfig micro_model_config() {
    ModelConfig m;
    m.patch_size = 2;
    m.embed_dim = 8;
    m.depth = 1;
    m.heads = 2;
    m.proj_dim = 16;
    m.pe_base_resolution = 2;
    m.inference_layer = 1;
    m.init_std = 0.02;
    return m;
}

/// Redraws matrices as N(0, 1/fan_in) and biases as N(0, 0.1^2) so every
/// layer, including the head output, has unit-scale activations.
inline void rescale_fan_in(EncoderParams<double>& p, Rng& rng) {
    p.visit([&](const std::string& name, Tensor<double>& t) {
        const bool bias = name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
        if (t.rank() != 2 && !bias) return;
        const double std = bias ? 0.1 : 1.0 / std::sqrt(static_cast<double>(t.dim(0)));
        for (auto& v : t.mutable_data()) v = std * rng.normal();
    });
}

/// Globals are 4x4 (a 2x2 token grid), locals 2x2. Student and teacher are
/// independent draws, centers are nonzero, and every frame masks K = 2 of
/// its 4 tokens.
inline MicroProblem make_micro_problem(std::uint64_t seed) {
    Rng rng(seed);
    MicroProblem p;
    p.model = micro_model_config();
    p.student = init_params<double>(p.model, rng.split("student"), true);
    p.teacher = TeacherState<double>::from_student(init_params<double>(p.model, rng.split("teacher"), false), p.model.proj_dim);
    Rng misc = rng.split("inputs");
    rescale_fan_in(p.student, misc);
    rescale_fan_in(p.teacher.params, misc);
    for (auto& c : p.teacher.center_cls) c = 0.1 * misc.normal();
    for (auto& c : p.teacher.center_patch) c = 0.1 * misc.normal();
    auto image = [&](std::size_t side) {
        std::vector<double> v(side * side * 3);
        for (auto& x : v) x = misc.uniform();
        return Tensor<double>({side, side, 3}, std::move(v));
    };
    ClipViews<double> clip;
    const std::size_t frames = 2, locals = 2;
    for (std::size_t f = 0; f < frames; ++f) {
        clip.globals.push_back(image(4));
        clip.locals.emplace_back();
        for (std::size_t j = 0; j < locals; ++j) clip.locals.back().push_back(image(2));
        clip.masks.push_back(blockwise_mask(2, 2, 2, misc));
    }
    p.batch.push_back(std::move(clip));
    return p;
}

struct LossGradCheck {
    std::string loss;
    GradCheckReport report;
};

/// Checks out_g2g, out_l2g, in_mim, in_aff and the total against central
/// differences over all student parameters.
inline std::vector<LossGradCheck> micro_grad_check(std::uint64_t seed, const GradCheckOptions& opt = {}) {
    MicroProblem p = make_micro_problem(seed);
    const std::vector<std::string> names = {"out_g2g", "out_l2g", "in_mim", "in_aff", "total"};
    std::vector<LossGradCheck> out;
    for (const auto& name : names) {
        ObjectiveSet terms{name == "out_g2g" || name == "total", name == "out_l2g" || name == "total",
                           name == "in_mim" || name == "total", name == "in_aff" || name == "total"};
        auto f = [&]() {
            auto res = ino_objective(p.student, p.teacher, p.batch, p.model, p.temps, terms);
            return res.losses.total;
        };
        out.push_back({name, grad_check(f, p.student.tensors(), opt)});
    }
    return out;
}

}  // namespace ino
