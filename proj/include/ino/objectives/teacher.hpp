#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ino/encoder/vit.hpp"
#include "ino/numerics/ops.hpp"
#include "ino/numerics/tensor.hpp"

namespace ino {

struct TemperatureConfig {
    double student = 0.1;
    double teacher = 0.04;

    void validate() const {
        if (!(student > 0.0) || !(teacher > 0.0)) throw std::invalid_argument("temperatures must be positive");
        if (teacher > student) throw std::invalid_argument("teacher temperature must not exceed student temperature");
    }
};

/// EMA copy of the student plus running output centers. Never part of a
/// gradient graph.
template <class T>
struct TeacherState {
    EncoderParams<T> params;
    std::vector<T> center_cls;
    std::vector<T> center_patch;
    double ema_momentum = 0.996;
    double center_momentum = 0.9;

    static TeacherState from_student(const EncoderParams<T>& student, std::size_t proj_dim) {
        TeacherState s;
        s.params = student.clone(false);
        s.center_cls.assign(proj_dim, T(0));
        s.center_patch.assign(proj_dim, T(0));
        return s;
    }
};

enum class OutputKind { cls, patch };

/// softmax((logits - center) / tau_t) row-wise; logits must carry no graph.
template <class T>
Tensor<T> teacher_distribution(const Tensor<T>& logits, const TeacherState<T>& state, T temperature, OutputKind kind) {
    if (logits.requires_grad()) throw std::invalid_argument("teacher_distribution: logits must be detached");
    const auto& center = kind == OutputKind::cls ? state.center_cls : state.center_patch;
    const std::size_t k = logits.shape().back();
    if (center.size() != k) {
        throw ShapeError("teacher_distribution: center length " + std::to_string(center.size()) + " vs logits " + shape_str(logits.shape()));
    }
    std::vector<T> neg(center.begin(), center.end());
    for (auto& v : neg) v = -v;
    return softmax_t(add_rowvec(logits, Tensor<T>({k}, std::move(neg))), logits.rank() - 1, temperature).detach();
}

/// softmax(logits / tau_s) row-wise; stays in the graph.
template <class T>
Tensor<T> student_distribution(const Tensor<T>& logits, T temperature) {
    return softmax_t(logits, logits.rank() - 1, temperature);
}

namespace detail {

template <class T>
void require_same_tree(const EncoderParams<T>& a, const EncoderParams<T>& b, const char* op) {
    auto na = a.names();
    auto nb = b.names();
    if (na != nb) throw std::invalid_argument(std::string(op) + ": parameter trees differ");
    auto ta = a.tensors();
    auto tb = b.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].shape() != tb[i].shape()) {
            throw ShapeError(std::string(op) + ": '" + na[i] + "' shape mismatch " + shape_str(ta[i].shape()) + " vs " + shape_str(tb[i].shape()));
        }
    }
}

}  // namespace detail

/// theta_t <- m * theta_t + (1 - m) * theta_s, elementwise, outside any graph.
template <class T>
void ema_update(TeacherState<T>& teacher, const EncoderParams<T>& student, double momentum) {
    detail::require_same_tree(teacher.params, student, "ema_update");
    auto ts = teacher.params.tensors();
    auto ss = student.tensors();
    const T m = static_cast<T>(momentum);
    const T one_minus = static_cast<T>(1.0 - momentum);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        auto dst = ts[i].mutable_data();
        auto src = ss[i].data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = m * dst[j] + one_minus * src[j];
    }
}

/// center <- m * center + (1 - m) * (row mean of the raw teacher logits).
template <class T>
void update_center(std::vector<T>& center, const Tensor<T>& batch_logits, double momentum) {
    const std::size_t k = batch_logits.shape().back();
    if (batch_logits.numel() == 0) throw std::invalid_argument("center_update: empty batch");
    if (center.size() != k) throw ShapeError("center_update: center length vs logits " + shape_str(batch_logits.shape()));
    const std::size_t rows = batch_logits.numel() / k;
    std::vector<double> mean(k, 0.0);
    auto d = batch_logits.data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < k; ++j) mean[j] += d[r * k + j];
    for (std::size_t j = 0; j < k; ++j) {
        center[j] = static_cast<T>(momentum * center[j] + (1.0 - momentum) * (mean[j] / static_cast<double>(rows)));
    }
}

template <class T>
void center_update(TeacherState<T>& state, const Tensor<T>* cls_logits, const Tensor<T>* patch_logits, double momentum) {
    if (cls_logits) update_center(state.center_cls, *cls_logits, momentum);
    if (patch_logits) update_center(state.center_patch, *patch_logits, momentum);
}

}  // namespace ino
