#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ino/numerics/ops.hpp"
#include "ino/numerics/tensor.hpp"
#include "ino/views/clip.hpp"
#include "ino/views/masking.hpp"

namespace ino {

/// A loss scalar plus the number of cross-entropy terms summed into it.
template <class T>
struct LossValue {
    Tensor<T> value;
    std::size_t terms = 0;
};

template <class T>
Tensor<T> zero_scalar() {
    return Tensor<T>::scalar(T(0));
}

/// Sum of row-wise cross-entropies (not the mean).
template <class T>
Tensor<T> cross_entropy_sum(const Tensor<T>& target, const Tensor<T>& prediction) {
    const std::size_t rows = target.numel() / target.shape().back();
    auto ce = cross_entropy_rows(target, prediction);
    return rows == 1 ? ce : scale(ce, T(rows));
}

/// Global-to-global class-token loss. One [1, k] distribution per frame on
/// each side; per pair the two cross terms T(g_a)->S(g_b), T(g_b)->S(g_a),
/// averaged over pairs.
template <class T>
LossValue<T> loss_out_g2g(const std::vector<Tensor<T>>& teacher_cls, const std::vector<Tensor<T>>& student_cls,
                          const FramePairSet& pairs) {
    if (pairs.empty()) throw std::invalid_argument("loss_out_g2g: no frame pairs");
    std::vector<Tensor<T>> terms;
    for (auto [a, b] : pairs) {
        if (a >= teacher_cls.size() || b >= teacher_cls.size() || a >= student_cls.size() || b >= student_cls.size()) {
            throw std::invalid_argument("loss_out_g2g: missing global view for pair (" + std::to_string(a) + "," + std::to_string(b) + ")");
        }
        const std::size_t views[2] = {a, b};
        for (std::size_t t : views) {
            for (std::size_t s : views) {
                if (s == t) continue;
                terms.push_back(cross_entropy_rows(teacher_cls[t], student_cls[s]));
            }
        }
    }
    return {scale(add_n(terms), T(1) / T(pairs.size())), terms.size()};
}

/// Local-to-global class-token loss. student_local_cls[f] is [M, k]; both
/// teacher globals of a pair supervise all 2M student locals of the pair.
template <class T>
LossValue<T> loss_out_l2g(const std::vector<Tensor<T>>& teacher_cls, const std::vector<Tensor<T>>& student_local_cls,
                          const FramePairSet& pairs, std::size_t local_crops) {
    if (pairs.empty()) throw std::invalid_argument("loss_out_l2g: no frame pairs");
    std::vector<Tensor<T>> parts;
    std::size_t terms = 0;
    for (auto [a, b] : pairs) {
        for (std::size_t f : {a, b}) {
            if (f >= student_local_cls.size() || student_local_cls[f].dim(0) != local_crops) {
                throw std::invalid_argument("loss_out_l2g: frame " + std::to_string(f) + " does not have " + std::to_string(local_crops) + " local crops");
            }
        }
        for (std::size_t t : {a, b}) {
            auto target = repeat_rows(teacher_cls.at(t), local_crops);
            for (std::size_t s : {a, b}) {
                parts.push_back(cross_entropy_sum(target, student_local_cls[s]));
                terms += local_crops;
            }
        }
    }
    return {scale(add_n(parts), T(1) / T(pairs.size())), terms};
}

/// Masked-token loss: (1/L) sum over frames of the cross-entropy between
/// teacher (unmasked input) and student (masked input) patch distributions at
/// masked positions. No masks means the in-generative path was gated off.
template <class T>
LossValue<T> loss_in_mim(const std::vector<Tensor<T>>& teacher_patch, const std::vector<Tensor<T>>& student_patch,
                         const std::vector<MaskPattern>& masks) {
    if (masks.empty()) return {zero_scalar<T>(), 0};
    if (teacher_patch.size() != masks.size() || student_patch.size() != masks.size()) {
        throw std::invalid_argument("loss_in_mim: need one mask per frame");
    }
    std::vector<Tensor<T>> parts;
    std::size_t terms = 0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (teacher_patch[i].dim(0) != masks[i].size() || student_patch[i].dim(0) != masks[i].size()) {
            throw ShapeError("loss_in_mim: mask of " + std::to_string(masks[i].size()) + " cells vs patch grid " + shape_str(student_patch[i].shape()));
        }
        auto idx = masks[i].masked_indices();
        if (idx.empty()) continue;
        parts.push_back(cross_entropy_sum(gather_rows(teacher_patch[i], idx), gather_rows(student_patch[i], idx)));
        terms += idx.size();
    }
    if (parts.empty()) return {zero_scalar<T>(), 0};
    return {scale(add_n(parts), T(1) / T(masks.size())), terms};
}

template <class T>
struct AffinityMatrix {
    Tensor<T> values;  // [K, K], row-stochastic
    std::size_t source = 0;
    std::size_t target = 0;
    T temperature = T(1);
};

/// softmax(Q_a Q_b^T / tau) row-wise. Rows of Q are expected unit-norm.
template <class T>
AffinityMatrix<T> build_affinity(const Tensor<T>& q_a, const Tensor<T>& q_b, T temperature, std::size_t source = 0,
                                 std::size_t target = 1) {
    if (q_a.rank() != 2 || q_b.rank() != 2 || q_a.dim(0) != q_b.dim(0) || q_a.dim(1) != q_b.dim(1)) {
        throw ShapeError("build_affinity: shape mismatch " + shape_str(q_a.shape()) + " vs " + shape_str(q_b.shape()));
    }
    return {softmax_t(matmul(q_a, transpose(q_b)), 1, temperature), source, target, temperature};
}

/// (1/(L-1)) sum over transitions of the row-summed cross-entropy between
/// teacher and student affinities.
template <class T>
LossValue<T> loss_in_aff(const std::vector<AffinityMatrix<T>>& teacher, const std::vector<AffinityMatrix<T>>& student) {
    if (teacher.empty() && student.empty()) return {zero_scalar<T>(), 0};
    if (teacher.size() != student.size()) throw ShapeError("loss_in_aff: transition count mismatch");
    std::vector<Tensor<T>> parts;
    std::size_t terms = 0;
    for (std::size_t i = 0; i < teacher.size(); ++i) {
        if (teacher[i].values.requires_grad()) throw std::invalid_argument("loss_in_aff: teacher affinity must be detached");
        parts.push_back(cross_entropy_sum(teacher[i].values, student[i].values));
        terms += teacher[i].values.dim(0);
    }
    return {scale(add_n(parts), T(1) / T(teacher.size())), terms};
}

template <class T>
struct LossBreakdown {
    Tensor<T> out_g2g = zero_scalar<T>();
    Tensor<T> out_l2g = zero_scalar<T>();
    Tensor<T> in_mim = zero_scalar<T>();
    Tensor<T> in_aff = zero_scalar<T>();
    Tensor<T> total = zero_scalar<T>();
    bool gated_in = false;
};

/// Equal-weight sum of the active terms. With the in-generative path gated
/// off, the total is exactly out_g2g + out_l2g.
template <class T>
LossBreakdown<T> total_loss(const Tensor<T>& out_g2g, const Tensor<T>& out_l2g, const std::optional<Tensor<T>>& in_mim,
                            const std::optional<Tensor<T>>& in_aff) {
    LossBreakdown<T> b;
    b.out_g2g = out_g2g;
    b.out_l2g = out_l2g;
    std::vector<Tensor<T>> parts{out_g2g, out_l2g};
    if (in_mim) {
        b.in_mim = *in_mim;
        parts.push_back(*in_mim);
    }
    if (in_aff) {
        b.in_aff = *in_aff;
        parts.push_back(*in_aff);
    }
    b.gated_in = in_mim.has_value() || in_aff.has_value();
    b.total = add_n(parts);
    return b;
}

}  // namespace ino
