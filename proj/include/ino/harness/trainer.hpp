#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ino/harness/checkpoint.hpp"
#include "ino/harness/config.hpp"
#include "ino/objectives/ino_objective.hpp"
#include "ino/optimizer/adamw.hpp"
#include "ino/optimizer/schedule.hpp"
#include "ino/util/log.hpp"
#include "ino/views/clip.hpp"
#include "ino/views/crops.hpp"
#include "ino/views/masking.hpp"
#include "ino/views/video_store.hpp"

namespace ino {

class TrainingAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kMaxConsecutiveSkips = 3;

struct StepReport {
    std::uint64_t step = 0;  // 1-based index of the completed step
    double out_g2g = 0, out_l2g = 0, in_mim = 0, in_aff = 0, total = 0;
    double lr = 0, wd = 0;
    bool gated = false;
    bool skipped = false;
};

inline std::string log_header() { return "step\tout_g2g\tout_l2g\tin_mim\tin_aff\ttotal\tlr\twd\tgate"; }

inline std::string format_log_line(const StepReport& r) {
    using config_detail::format_double;
    std::string s = std::to_string(r.step);
    for (double v : {r.out_g2g, r.out_l2g, r.in_mim, r.in_aff, r.total, r.lr, r.wd}) s += '\t' + format_double(v);
    s += r.gated ? "\t1" : "\t0";
    return s;
}

class Trainer {
public:
    Trainer(RunConfig cfg, std::vector<Video> videos) : cfg_(std::move(cfg)), videos_(std::move(videos)) {
        cfg_.validate();
        if (videos_.empty()) throw std::invalid_argument("trainer: no training videos");
        for (const auto& v : videos_) {
            if (!v.masks.empty()) throw std::invalid_argument("trainer: training video '" + v.id + "' carries masks");
        }
        optim_ = cfg_.optimizer(steps_per_epoch());
        optim_.validate();
    }

    const RunConfig& config() const { return cfg_; }
    const OptimizerConfig& optimizer() const { return optim_; }

    std::size_t steps_per_epoch() const { return (videos_.size() + cfg_.batch_size - 1) / cfg_.batch_size; }

    std::size_t total_steps() const {
        const std::size_t full = cfg_.epochs * steps_per_epoch();
        return cfg_.max_steps ? std::min(cfg_.max_steps, full) : full;
    }

    /// Video order of an epoch: a Fisher-Yates shuffle seeded by (seed, epoch).
    std::vector<std::size_t> epoch_order(std::size_t epoch) const {
        std::vector<std::size_t> order(videos_.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng = Rng(cfg_.seed).split("epoch").split(epoch);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        return order;
    }

    /// Clips, crops and masks for step `step` (0-based). All draws derive
    /// from (seed, step), so a resumed run rebuilds the same batch.
    std::vector<ClipViews<float>> make_batch(std::uint64_t step, bool& gated) const {
        const std::size_t spe = steps_per_epoch();
        const auto order = epoch_order(step / spe);
        const std::size_t within = step % spe;
        Rng step_rng = Rng(cfg_.seed).split("step").split(step);
        gated = step_rng.split("gate").uniform() < cfg_.view.gate_probability;
        const std::size_t grid = cfg_.view.global_size / cfg_.model.patch_size;

        std::vector<ClipViews<float>> batch;
        for (std::size_t b = 0; b < cfg_.batch_size; ++b) {
            const Video& video = videos_[order[(within * cfg_.batch_size + b) % order.size()]];
            Rng clip_rng = step_rng.split(b);
            Rng sample_rng = clip_rng.split("clip");
            const auto clip = sample_clip(video.frames, video.id, sample_rng, cfg_.view.clip_length, cfg_.view.frameskip);
            const auto crops = make_crops(clip, clip_rng.split("crops"), cfg_.view);
            ClipViews<float> views;
            for (const auto& g : crops.globals) views.globals.push_back(to_tensor<float>(g));
            for (const auto& frame_locals : crops.locals) {
                std::vector<Tensor<float>> row;
                for (const auto& l : frame_locals) row.push_back(to_tensor<float>(l));
                views.locals.push_back(std::move(row));
            }
            if (gated) {
                Rng mask_rng = clip_rng.split("mask");
                auto masks = sample_clip_masks(cfg_.view.clip_length, grid, grid, cfg_.view.ratio_min, cfg_.view.ratio_max, mask_rng);
                if (masks.front().count > 0) views.masks = std::move(masks);
            }
            batch.push_back(std::move(views));
        }
        return batch;
    }

    /// One optimization step. Non-finite losses skip the update; the third
    /// consecutive skip throws TrainingAborted.
    StepReport step(TrainState& s) const {
        StepReport r;
        r.step = s.step + 1;
        r.lr = lr_at(s.step, optim_);
        r.wd = wd_at(s.step, optim_);
        const auto batch = make_batch(s.step, r.gated);

        auto params = param_refs(s.student);
        for (auto& p : params) p.tensor.zero_grad();

        std::optional<ObjectiveResult<float>> res;
        try {
            res = ino_objective(s.student, s.teacher, batch, cfg_.model, cfg_.temps, cfg_.objectives);
            const auto& l = res->losses;
            r.out_g2g = l.out_g2g.item();
            r.out_l2g = l.out_l2g.item();
            r.in_mim = l.in_mim.item();
            r.in_aff = l.in_aff.item();
            r.total = l.total.item();
            if (!std::isfinite(r.total)) throw NumericError("non-finite total loss");
            backward(l.total);
            if (!adamw_step(params, s.opt, r.lr, r.wd, optim_)) throw NumericError("non-finite gradient");
        } catch (const NumericError& e) {
            r.skipped = true;
            r.total = std::numeric_limits<double>::quiet_NaN();
            s.step += 1;
            s.skip_streak += 1;
            for (auto& p : params) p.tensor.zero_grad();
            log_warning("step " + std::to_string(r.step) + " skipped: " + e.what());
            if (s.skip_streak >= kMaxConsecutiveSkips) {
                throw TrainingAborted("training aborted after " + std::to_string(kMaxConsecutiveSkips) + " consecutive non-finite steps");
            }
            return r;
        }
        for (auto& p : params) p.tensor.zero_grad();
        ema_update(s.teacher, s.student, s.teacher.ema_momentum);
        center_update(s.teacher, res->teacher_cls_logits ? &*res->teacher_cls_logits : nullptr,
                      res->teacher_patch_logits ? &*res->teacher_patch_logits : nullptr, s.teacher.center_momentum);
        s.step += 1;
        s.skip_streak = 0;
        return r;
    }

    /// Runs until total_steps(). Appends log lines to <out>/train_log.tsv and
    /// saves <out>/checkpoints/epoch_NNNN.ckpt at every epoch boundary plus
    /// <out>/last.ckpt at the end.
    void run(TrainState& s, const std::filesystem::path& out) const {
        std::filesystem::create_directories(out / "checkpoints");
        const auto log_path = out / "train_log.tsv";
        std::ofstream log_file(log_path, s.step == 0 ? std::ios::trunc : std::ios::app);
        if (!log_file) throw IoError("cannot open " + log_path.string());
        if (s.step == 0) log_file << log_header() << '\n';
        const std::size_t spe = steps_per_epoch();
        while (s.step < total_steps()) {
            const auto r = step(s);
            log_file << format_log_line(r) << '\n';
            log_info(format_log_line(r));
            if (s.step % spe == 0) {
                char name[32];
                std::snprintf(name, sizeof(name), "epoch_%04zu.ckpt", static_cast<std::size_t>(s.step / spe));
                save_checkpoint(out / "checkpoints" / name, cfg_, s);
            }
        }
        save_checkpoint(out / "last.ckpt", cfg_, s);
    }

private:
    RunConfig cfg_;
    std::vector<Video> videos_;
    OptimizerConfig optim_;
};

}  // namespace ino
