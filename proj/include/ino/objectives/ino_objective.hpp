#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ino/encoder/vit.hpp"
#include "ino/objectives/losses.hpp"
#include "ino/objectives/teacher.hpp"
#include "ino/views/clip.hpp"
#include "ino/views/masking.hpp"

namespace ino {

/// Which terms of the objective are active.
struct ObjectiveSet {
    bool out_g2g = true;
    bool out_l2g = true;
    bool in_mim = true;
    bool in_aff = true;

    bool any_in() const { return in_mim || in_aff; }
};

/// Network inputs for one clip: a global crop per frame, M local crops per
/// frame, and per-frame masks (empty when the in-generative path is gated off).
template <class T>
struct ClipViews {
    std::vector<Tensor<T>> globals;
    std::vector<std::vector<Tensor<T>>> locals;
    std::vector<MaskPattern> masks;
};

template <class T>
struct ObjectiveResult {
    LossBreakdown<T> losses;
    std::size_t g2g_terms = 0;
    std::size_t l2g_terms = 0;
    std::size_t mim_terms = 0;
    std::size_t aff_terms = 0;
    // Raw teacher logits over the batch, for center_update.
    std::optional<Tensor<T>> teacher_cls_logits;
    std::optional<Tensor<T>> teacher_patch_logits;
    bool masked_forward_ran = false;
};

/// The full objective over a batch of clips, each term averaged over clips.
///
/// Teacher: unmasked globals. Student: unmasked globals (class token, for the
/// global-to-global term), locals (class token), and, when masks are present,
/// masked globals (patch tokens, for the masked-token and affinity terms).
template <class T>
ObjectiveResult<T> ino_objective(const EncoderParams<T>& student, const TeacherState<T>& teacher,
                                 const std::vector<ClipViews<T>>& batch, const ModelConfig& model,
                                 const TemperatureConfig& temps, const ObjectiveSet& terms) {
    if (batch.empty()) throw std::invalid_argument("ino_objective: empty batch");
    const T tau_s = static_cast<T>(temps.student);
    const T tau_t = static_cast<T>(temps.teacher);

    ObjectiveResult<T> res;
    std::vector<Tensor<T>> g2g, l2g, mim, aff;
    std::vector<Tensor<T>> teacher_cls_rows, teacher_patch_rows;
    bool gated = false;

    for (const auto& clip : batch) {
        const std::size_t frames = clip.globals.size();
        const auto pairs = make_frame_pairs(frames);
        const bool in_path = !clip.masks.empty() && terms.any_in();
        if (!clip.masks.empty() && clip.masks.size() != frames) throw std::invalid_argument("ino_objective: one mask per frame required");
        gated = gated || !clip.masks.empty();

        std::vector<Tensor<T>> t_cls, t_patch_logits, s_cls;
        for (const auto& g : clip.globals) {
            ForwardOptions opt;
            opt.patch_head = in_path;
            auto out = forward(patchify(g, teacher.params, model), teacher.params, model, opt);
            teacher_cls_rows.push_back(out.cls_logits);
            t_cls.push_back(teacher_distribution(out.cls_logits, teacher, tau_t, OutputKind::cls));
            if (in_path) {
                teacher_patch_rows.push_back(out.patch_logits);
                t_patch_logits.push_back(out.patch_logits);
            }
        }

        if (terms.out_g2g) {
            for (const auto& g : clip.globals) {
                ForwardOptions opt;
                opt.patch_head = false;
                auto out = forward(patchify(g, student, model), student, model, opt);
                s_cls.push_back(student_distribution(out.cls_logits, tau_s));
            }
            auto v = loss_out_g2g(t_cls, s_cls, pairs);
            g2g.push_back(v.value);
            res.g2g_terms += v.terms;
        }

        if (terms.out_l2g) {
            std::vector<Tensor<T>> s_local;
            for (const auto& frame_locals : clip.locals) {
                std::vector<Tensor<T>> rows;
                for (const auto& l : frame_locals) {
                    ForwardOptions opt;
                    opt.patch_head = false;
                    rows.push_back(forward(patchify(l, student, model), student, model, opt).cls_logits);
                }
                s_local.push_back(student_distribution(concat_rows(rows), tau_s));
            }
            const std::size_t m = clip.locals.empty() ? 0 : clip.locals[0].size();
            auto v = loss_out_l2g(t_cls, s_local, pairs, m);
            l2g.push_back(v.value);
            res.l2g_terms += v.terms;
        }

        if (in_path) {
            res.masked_forward_ran = true;
            std::vector<Tensor<T>> t_patch, s_patch_logits, s_patch;
            for (std::size_t i = 0; i < frames; ++i) {
                auto seq = apply_mask_tokens(patchify(clip.globals[i], student, model), clip.masks[i].cells, student);
                auto out = forward(seq, student, model);
                s_patch_logits.push_back(out.patch_logits);
                s_patch.push_back(student_distribution(out.patch_logits, tau_s));
                t_patch.push_back(teacher_distribution(t_patch_logits[i], teacher, tau_t, OutputKind::patch));
            }
            if (terms.in_mim) {
                auto v = loss_in_mim(t_patch, s_patch, clip.masks);
                mim.push_back(v.value);
                res.mim_terms += v.terms;
            }
            if (terms.in_aff) {
                std::vector<AffinityMatrix<T>> a_t, a_s;
                for (std::size_t i = 0; i + 1 < frames; ++i) {
                    auto idx_a = clip.masks[i].masked_indices();
                    auto idx_b = clip.masks[i + 1].masked_indices();
                    if (idx_a.size() != idx_b.size()) throw ShapeError("ino_objective: frames disagree on masked count K");
                    if (idx_a.empty()) continue;
                    auto qt_a = l2_normalize_rows(gather_rows(t_patch_logits[i], idx_a));
                    auto qt_b = l2_normalize_rows(gather_rows(t_patch_logits[i + 1], idx_b));
                    auto qs_a = l2_normalize_rows(gather_rows(s_patch_logits[i], idx_a));
                    auto qs_b = l2_normalize_rows(gather_rows(s_patch_logits[i + 1], idx_b));
                    a_t.push_back(build_affinity(qt_a, qt_b, tau_t, i, i + 1));
                    a_s.push_back(build_affinity(qs_a, qs_b, tau_s, i, i + 1));
                }
                if (!a_t.empty()) {
                    auto v = loss_in_aff(a_t, a_s);
                    aff.push_back(v.value);
                    res.aff_terms += v.terms;
                }
            }
        }
    }

    const T inv_batch = T(1) / T(batch.size());
    auto batch_mean = [&](const std::vector<Tensor<T>>& parts) {
        return parts.empty() ? zero_scalar<T>() : scale(add_n(parts), inv_batch);
    };
    std::optional<Tensor<T>> mim_total, aff_total;
    if (gated && terms.in_mim) mim_total = batch_mean(mim);
    if (gated && terms.in_aff) aff_total = batch_mean(aff);
    res.losses = total_loss(batch_mean(g2g), batch_mean(l2g), mim_total, aff_total);
    res.losses.gated_in = gated;
    res.teacher_cls_logits = concat_rows(teacher_cls_rows);
    if (!teacher_patch_rows.empty()) res.teacher_patch_logits = concat_rows(teacher_patch_rows);
    return res;
}

}  // namespace ino
