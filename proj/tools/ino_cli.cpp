// Command-line front end: dataset generation, training, propagation,
// evaluation and the gradient check.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ino/ino.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    bool quiet = false;
    bool verbose = false;
};

ino::RunConfig build_config(const Common& c) {
    ino::RunConfig cfg = c.config_path.empty() ? ino::RunConfig{} : ino::load_config(c.config_path);
    for (const auto& o : c.overrides) ino::apply_override(cfg, o);
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw ino::ConfigError(std::string(what) + " is not set");
    if (!fs::exists(path)) throw ino::IoError(std::string(what) + " not found: " + path);
}

int cmd_gen_data(const Common& c, const ino::SyntheticDatasetConfig& dc, const std::string& out) {
    const auto paths = ino::gen_synthetic_dataset(dc, ino::Rng(c.seed.value_or(0)), out);
    std::cout << "train index: " << paths.train_index.string() << "\n"
              << "eval index:  " << paths.eval_index.string() << "\n";
    return kExitOk;
}

int cmd_train(const Common& c, const std::string& resume, const std::string& out_override) {
    ino::RunConfig cfg;
    ino::TrainState state;
    if (!resume.empty()) {
        auto ck = ino::load_checkpoint(resume);
        cfg = ck.config;
        for (const auto& o : c.overrides) ino::apply_override(cfg, o);
        state = std::move(ck.state);
    } else {
        cfg = build_config(c);
    }
    if (!out_override.empty()) cfg.output = out_override;
    cfg.validate();
    require_file(cfg.train_data, "train.data");
    if (cfg.output.empty()) throw ino::ConfigError("train.output is not set");
    if (resume.empty()) state = ino::init_train_state(cfg);

    ino::Trainer trainer(cfg, ino::load_training_videos(cfg.train_data));
    fs::create_directories(cfg.output);
    {
        std::ofstream os(fs::path(cfg.output) / "config.txt");
        os << ino::to_text(cfg);
    }
    trainer.run(state, cfg.output);
    std::cout << "trained " << state.step << " steps; checkpoint " << (fs::path(cfg.output) / "last.ckpt").string() << "\n";
    return kExitOk;
}

/// Encoder for eval/propagate: a checkpoint's student, or a freshly seeded
/// one when no checkpoint is given.
std::pair<ino::RunConfig, ino::EncoderParams<float>> load_encoder(const Common& c, const std::string& checkpoint) {
    if (checkpoint.empty()) {
        auto cfg = build_config(c);
        cfg.validate();
        return {cfg, ino::init_train_state(cfg).student};
    }
    auto ck = ino::load_checkpoint(checkpoint);
    for (const auto& o : c.overrides) ino::apply_override(ck.config, o);
    ck.config.validate();
    return {ck.config, ck.state.student};
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& data, const std::string& report) {
    auto [cfg, params] = load_encoder(c, checkpoint);
    const std::string index = data.empty() ? cfg.eval_data : data;
    require_file(index, "evaluation index");
    const auto scores = ino::evaluate_videos(ino::load_evaluation_videos(index), ino::encoder_features(params, cfg.model), cfg.prop);
    if (report.empty()) {
        ino::write_report(std::cout, scores);
    } else {
        std::ofstream os(report);
        if (!os) throw ino::IoError("cannot open " + report);
        ino::write_report(os, scores);
        std::cout << "report written to " << report << "\n";
    }
    return kExitOk;
}

int cmd_propagate(const Common& c, const std::string& checkpoint, const std::string& video_dir, const std::string& out) {
    auto [cfg, params] = load_encoder(c, checkpoint);
    const auto video = ino::load_video(video_dir, true);
    const auto masks = ino::segment_video(video, ino::encoder_features(params, cfg.model), cfg.prop);
    fs::create_directories(out);
    for (std::size_t t = 0; t < masks.size(); ++t) ino::write_pgm(fs::path(out) / ino::mask_file_name(t), masks[t]);
    std::cout << "wrote " << masks.size() << " masks to " << out << "\n";
    return kExitOk;
}

int cmd_grad_check(const Common& c, double threshold) {
    const auto results = ino::micro_grad_check(c.seed.value_or(0));
    bool ok = true;
    std::cout << "loss\ttensor_rel_error\tcoord_rel_error\tcoords\n";
    for (const auto& r : results) {
        std::cout << r.loss << '\t' << std::scientific << std::setprecision(3) << r.report.max_tensor_rel_error << '\t'
                  << r.report.max_rel_error << '\t' << std::defaultfloat << r.report.entries.size() << '\n';
        ok = ok && r.report.passes(threshold);
    }
    std::cout << (ok ? "PASS" : "FAIL") << " (threshold " << threshold << ")\n";
    return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ino: self-supervised video correspondence training and label-propagation evaluation"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--config", common.config_path, "Config file (key = value lines)");
    app.add_option("--seed", common.seed, "Seed for all randomness");
    app.add_option("--set", common.overrides, "Override a config key: --set key=value")->allow_extra_args(false);
    app.add_flag("-q,--quiet", common.quiet, "Only print warnings");
    app.add_flag("-v,--verbose", common.verbose, "Print debug messages");

    ino::SyntheticDatasetConfig dc;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic moving-shapes dataset");
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--train-videos", dc.train_videos, "Training videos")->capture_default_str();
    gen->add_option("--eval-videos", dc.eval_videos, "Evaluation videos")->capture_default_str();
    gen->add_option("--train-frames", dc.train_frames, "Frames per training video")->capture_default_str();
    gen->add_option("--eval-frames", dc.eval_frames, "Frames per evaluation video")->capture_default_str();
    gen->add_option("--height", dc.height, "Frame height")->capture_default_str();
    gen->add_option("--width", dc.width, "Frame width")->capture_default_str();

    std::string resume, train_out;
    auto* train = app.add_subcommand("train", "Train an encoder");
    train->add_option("--resume", resume, "Continue from a checkpoint");
    train->add_option("--out", train_out, "Run directory (overrides train.output)");

    std::string checkpoint, data, report;
    auto* eval = app.add_subcommand("eval", "Score label propagation on an evaluation split");
    eval->add_option("--checkpoint", checkpoint, "Checkpoint; omit to score a freshly seeded encoder");
    eval->add_option("--data", data, "Evaluation videos.txt (default: eval.data)");
    eval->add_option("--report", report, "Write the report here instead of stdout");

    std::string video_dir, prop_out;
    auto* prop = app.add_subcommand("propagate", "Propagate a first-frame mask through one video");
    prop->add_option("--checkpoint", checkpoint, "Checkpoint; omit to use a freshly seeded encoder");
    prop->add_option("--video", video_dir, "Video directory with mask_00000.pgm")->required();
    prop->add_option("--out", prop_out, "Directory for predicted masks")->required();

    double threshold = 1e-4;
    auto* grad = app.add_subcommand("grad-check", "Finite-difference check of every loss on the micro model");
    grad->add_option("--threshold", threshold, "Maximum relative error")->capture_default_str();

    if (argc <= 1) {
        std::cerr << app.help();
        return kExitUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    ino::log_level() = common.verbose ? ino::LogLevel::debug : common.quiet ? ino::LogLevel::warning : ino::LogLevel::info;
    try {
        if (*gen) return cmd_gen_data(common, dc, gen_out);
        if (*train) return cmd_train(common, resume, train_out);
        if (*eval) return cmd_eval(common, checkpoint, data, report);
        if (*prop) return cmd_propagate(common, checkpoint, video_dir, prop_out);
        if (*grad) return cmd_grad_check(common, threshold);
    } catch (const ino::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
