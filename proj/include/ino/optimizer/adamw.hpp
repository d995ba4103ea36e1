#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ino/numerics/tensor.hpp"
#include "ino/optimizer/schedule.hpp"
#include "ino/util/log.hpp"

namespace ino {

/// A parameter as the optimizer sees it.
template <class T>
struct ParamRef {
    std::string name;
    Tensor<T> tensor;
};

/// 1-D tensors (biases, norm gains) and the class/mask tokens are not decayed.
inline bool decay_exempt(const std::string& name, const Shape& shape) {
    if (shape.size() <= 1) return true;
    return name == "cls_token" || name == "cls_pos" || name == "mask_token";
}

template <class T>
struct OptState {
    std::vector<std::vector<T>> first_moment;
    std::vector<std::vector<T>> second_moment;
    std::uint64_t step = 0;

    static OptState for_params(const std::vector<ParamRef<T>>& params) {
        OptState s;
        for (const auto& p : params) {
            s.first_moment.emplace_back(p.tensor.numel(), T(0));
            s.second_moment.emplace_back(p.tensor.numel(), T(0));
        }
        return s;
    }
};

/// One decoupled-weight-decay Adam step. Returns false (and leaves params
/// and state untouched) when any gradient is non-finite.
template <class T>
bool adamw_step(std::vector<ParamRef<T>>& params, OptState<T>& state, double lr, double wd, const OptimizerConfig& cfg) {
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw ShapeError("adamw_step: optimizer state does not match parameter list");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = params[i].tensor;
        if (state.first_moment[i].size() != t.numel() || state.second_moment[i].size() != t.numel()) {
            throw ShapeError("adamw_step: state shape mismatch for '" + params[i].name + "'");
        }
        if (!t.has_grad()) continue;
        for (T g : t.grad()) {
            if (!std::isfinite(g)) {
                log_warning("adamw_step: non-finite gradient in '" + params[i].name + "', step skipped");
                return false;
            }
        }
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        const bool decay = !decay_exempt(p.name, p.tensor.shape());
        const bool has_grad = p.tensor.has_grad();
        auto grad = p.tensor.grad();
        auto data = p.tensor.mutable_data();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double g = has_grad ? static_cast<double>(grad[j]) : 0.0;
            m[j] = static_cast<T>(cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g);
            v[j] = static_cast<T>(cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g);
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            const double theta = data[j];
            const double update = m_hat / (std::sqrt(v_hat) + cfg.eps) + (decay ? wd * theta : 0.0);
            data[j] = static_cast<T>(theta - lr * update);
        }
    }
    return true;
}

}  // namespace ino
