#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "ino/harness/checkpoint.hpp"
#include "ino/harness/config.hpp"
#include "ino/harness/evaluate.hpp"
#include "ino/harness/synthetic.hpp"
#include "ino/harness/trainer.hpp"
#include "support.hpp"

using namespace ino;
using ino::test::TempDir;

namespace {

namespace fs = std::filesystem;

RunConfig tiny_config() {
    RunConfig c;
    c.seed = 3;
    c.epochs = 2;
    c.batch_size = 2;
    c.view.clip_length = 2;
    c.view.local_crops = 2;
    c.view.global_size = 16;
    c.view.local_size = 8;
    c.view.frameskip = 1;
    c.model.patch_size = 4;
    c.model.embed_dim = 16;
    c.model.depth = 2;
    c.model.heads = 2;
    c.model.mlp_ratio = 2;
    c.model.proj_layers = 2;
    c.model.proj_dim = 16;
    c.model.proj_hidden = 32;
    c.model.pe_base_resolution = 4;
    c.model.inference_layer = 2;
    c.optim.warmup_epochs = 1;
    c.optim.lr_scale = 0.5;
    c.prop.radius = 4;
    return c;
}

std::vector<Video> tiny_videos(std::uint64_t seed, std::size_t n, bool masks, std::size_t frames = 6) {
    Rng rng(seed);
    std::vector<Video> out;
    for (std::size_t i = 0; i < n; ++i) {
        Rng r = rng.split(i);
        out.push_back(render_video(random_scene_spec(r, 24, 24, frames), "v" + std::to_string(i), masks));
    }
    return out;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string checkpoint_bytes(const RunConfig& cfg, const TrainState& s) {
    std::ostringstream os;
    write_checkpoint(os, cfg, s);
    return os.str();
}

bool same_params(const EncoderParams<float>& a, const EncoderParams<float>& b) {
    auto ta = a.tensors(), tb = b.tensors();
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (!std::equal(ta[i].data().begin(), ta[i].data().end(), tb[i].data().begin(), tb[i].data().end())) return false;
    }
    return true;
}

std::pair<double, double> centroid(const MaskRaster& m, std::uint8_t id) {
    double sy = 0, sx = 0, n = 0;
    for (std::size_t y = 0; y < m.height; ++y)
        for (std::size_t x = 0; x < m.width; ++x)
            if (m.at(y, x) == id) {
                sy += static_cast<double>(y);
                sx += static_cast<double>(x);
                n += 1;
            }
    return {sy / n, sx / n};
}

}  // namespace

// ---- config

TEST(Config, TextRoundTrip) {
    RunConfig c = tiny_config();
    c.train_data = "/tmp/some where/videos.txt";
    c.view.augment = AugmentTarget::both;
    c.objectives.in_aff = false;
    c.temps.teacher = 0.0375;
    c.optim.eps = 1.0 / 3.0;
    const auto text = to_text(c);
    const auto back = parse_config(text);
    EXPECT_EQ(to_text(back), text);
    EXPECT_EQ(back.optim.eps, 1.0 / 3.0);
    EXPECT_EQ(back.train_data, c.train_data);
    EXPECT_FALSE(back.objectives.in_aff);
    EXPECT_EQ(to_text(parse_config(to_text(RunConfig{}))), to_text(RunConfig{}));
}

TEST(Config, EveryKeyRoundTrips) {
    RunConfig c;
    for (const auto& key : config_keys()) {
        const auto v = get_config_value(c, key);
        set_config_value(c, key, v);
        EXPECT_EQ(get_config_value(c, key), v) << key;
    }
}

TEST(Config, CommentsAndWhitespace) {
    auto c = parse_config("# header\n\n  view.local_crops   =  3  # trailing\nseed=42\n");
    EXPECT_EQ(c.view.local_crops, 3u);
    EXPECT_EQ(c.seed, 42u);
}

TEST(Config, Errors) {
    try {
        parse_config("seed = 1\nno.such.key = 2\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("unknown config key"), std::string::npos);
    }
    EXPECT_THROW(parse_config("seed = abc"), ConfigError);
    EXPECT_THROW(parse_config("view.local_crops = 2.5"), ConfigError);
    EXPECT_THROW(parse_config("loss.in_mim = maybe"), ConfigError);
    EXPECT_THROW(parse_config("seed"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/run.conf"), ConfigError);
}

TEST(Config, ValidationWrapsSubConfigs) {
    auto c = tiny_config();
    EXPECT_NO_THROW(c.validate());
    c.view.clip_length = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config();
    c.model.patch_size = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config();
    c.ema_momentum = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config();
    c.objectives = {false, false, false, false};
    EXPECT_THROW(c.validate(), ConfigError);
}

// ---- synthetic data

TEST(Synthetic, StaticDisc) {
    SyntheticSceneSpec s;
    s.frames = 4;
    s.objects.push_back({ShapeKind::disc, 16, 16, 10, 10, 0, 0, {0.f, 1.f, 0.f}});
    auto v = render_video(s, "disc", true);
    ASSERT_EQ(v.frames.size(), 4u);
    for (std::size_t t = 1; t < 4; ++t) {
        EXPECT_EQ(v.frames[t], v.frames[0]);
        EXPECT_EQ(v.masks[t], v.masks[0]);
    }
    EXPECT_EQ(v.masks[0].max_id(), 1);
}

TEST(Synthetic, MovingRectangleCentroid) {
    SyntheticSceneSpec s;
    s.frames = 8;
    s.objects.push_back({ShapeKind::rectangle, 8, 12, 6, 4, 1, 0, {1.f, 1.f, 1.f}});
    auto v = render_video(s, "rect", true);
    const auto c0 = centroid(v.masks[0], 1);
    for (std::size_t t = 1; t < 8; ++t) {
        const auto c = centroid(v.masks[t], 1);
        EXPECT_NEAR(c.second - c0.second, static_cast<double>(t), 1e-12) << t;
        EXPECT_NEAR(c.first, c0.first, 1e-12);
    }
}

TEST(Synthetic, ObjectsStayOnCanvasProperty) {
    Rng rng(4);
    for (int trial = 0; trial < 40; ++trial) {
        auto s = random_scene_spec(rng, 32, 32, 40);
        s.objects.resize(1);
        s.objects[0].vx *= 3;
        auto v = render_video(s, "x", true);
        for (const auto& m : v.masks) EXPECT_EQ(m.max_id(), 1);
    }
}

TEST(Synthetic, DatasetLayoutAndDeterminism) {
    TempDir a("syn_a"), b("syn_b");
    SyntheticDatasetConfig dc;
    dc.train_videos = 2;
    dc.eval_videos = 2;
    dc.train_frames = 5;
    dc.eval_frames = 4;
    const auto pa = gen_synthetic_dataset(dc, Rng(9), a.path());
    const auto pb = gen_synthetic_dataset(dc, Rng(9), b.path());
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a.path())) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), a.path());
        EXPECT_EQ(read_bytes(e.path()), read_bytes(b.path() / rel)) << rel;
        ++files;
    }
    EXPECT_EQ(files, 2u + 2 * 5 + 2 * 4 * 2);
    const auto train = load_training_videos(pa.train_index);
    const auto eval = load_evaluation_videos(pb.eval_index);
    ASSERT_EQ(train.size(), 2u);
    EXPECT_TRUE(train[0].masks.empty());
    EXPECT_EQ(eval[1].masks.size(), 4u);
    EXPECT_THROW(load_training_videos(pa.eval_index), IoError);
}

// ---- checkpoints

TEST(Checkpoint, SaveLoadSaveIsBitwise) {
    TempDir d("ckpt");
    auto cfg = tiny_config();
    Trainer tr(cfg, tiny_videos(1, 3, false));
    auto s = init_train_state(cfg);
    tr.step(s);
    tr.step(s);
    save_checkpoint(d.path() / "a.ckpt", cfg, s);
    auto ck = load_checkpoint(d.path() / "a.ckpt");
    save_checkpoint(d.path() / "b.ckpt", ck.config, ck.state);
    EXPECT_EQ(read_bytes(d.path() / "a.ckpt"), read_bytes(d.path() / "b.ckpt"));
    EXPECT_EQ(ck.state.step, 2u);
    EXPECT_EQ(ck.state.opt.step, s.opt.step);
    EXPECT_TRUE(same_params(ck.state.student, s.student));
    EXPECT_TRUE(same_params(ck.state.teacher.params, s.teacher.params));
    EXPECT_EQ(ck.state.teacher.center_cls, s.teacher.center_cls);
    EXPECT_EQ(ck.state.teacher.center_patch, s.teacher.center_patch);
    EXPECT_EQ(ck.state.opt.second_moment, s.opt.second_moment);
    EXPECT_EQ(to_text(ck.config), to_text(cfg));
    for (const auto& t : ck.state.student.tensors()) EXPECT_TRUE(t.requires_grad());
    for (const auto& t : ck.state.teacher.params.tensors()) EXPECT_FALSE(t.requires_grad());
}

TEST(Checkpoint, CorruptInputRejected) {
    auto cfg = tiny_config();
    auto bytes = checkpoint_bytes(cfg, init_train_state(cfg));
    {
        auto bad = bytes;
        bad[0] = 'X';
        std::istringstream is(bad);
        EXPECT_THROW(read_checkpoint(is), FormatError);
    }
    {
        std::istringstream is(bytes.substr(0, bytes.size() / 2));
        EXPECT_THROW(read_checkpoint(is), FormatError);
    }
    EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), IoError);
}

// ---- training

TEST(Trainer, StepIsDeterministic) {
    auto cfg = tiny_config();
    auto videos = tiny_videos(2, 3, false);
    Trainer tr(cfg, videos);
    auto a = init_train_state(cfg), b = init_train_state(cfg);
    for (int i = 0; i < 3; ++i) {
        const auto ra = tr.step(a), rb = tr.step(b);
        EXPECT_EQ(format_log_line(ra), format_log_line(rb));
        EXPECT_EQ(ra.total, rb.total);
        EXPECT_FALSE(ra.skipped);
    }
    EXPECT_EQ(checkpoint_bytes(cfg, a), checkpoint_bytes(cfg, b));
}

TEST(Trainer, ZeroEmaMomentumCopiesStudent) {
    auto cfg = tiny_config();
    cfg.ema_momentum = 0.0;
    Trainer tr(cfg, tiny_videos(3, 3, false));
    auto s = init_train_state(cfg);
    for (int i = 0; i < 3; ++i) {
        tr.step(s);
        EXPECT_TRUE(same_params(s.teacher.params, s.student));
    }
}

TEST(Trainer, ParametersMoveAndTeacherLags) {
    auto cfg = tiny_config();
    Trainer tr(cfg, tiny_videos(4, 3, false));
    auto s = init_train_state(cfg);
    const auto init = s.student.clone(false);
    tr.step(s);
    tr.step(s);
    EXPECT_FALSE(same_params(s.student, init));
    EXPECT_FALSE(same_params(s.teacher.params, s.student));
    EXPECT_EQ(s.opt.step, 2u);
}

TEST(Trainer, ResumeIsBitwiseTransparent) {
    TempDir straight("run_a"), split("run_b");
    auto cfg = tiny_config();
    cfg.epochs = 3;
    auto videos = tiny_videos(5, 3, false);
    Trainer tr(cfg, videos);
    ASSERT_EQ(tr.total_steps(), 6u);
    auto a = init_train_state(cfg);
    tr.run(a, straight.path());

    auto b = init_train_state(cfg);
    auto head = cfg;
    head.max_steps = 4;
    Trainer(head, videos).run(b, split.path());
    auto ck = load_checkpoint(split.path() / "last.ckpt");
    EXPECT_EQ(ck.state.step, 4u);
    Trainer(cfg, videos).run(ck.state, split.path());

    EXPECT_EQ(read_bytes(straight.path() / "last.ckpt"), read_bytes(split.path() / "last.ckpt"));
    EXPECT_EQ(checkpoint_bytes(cfg, a), checkpoint_bytes(cfg, ck.state));
    EXPECT_EQ(read_bytes(straight.path() / "train_log.tsv"), read_bytes(split.path() / "train_log.tsv"));
    EXPECT_EQ(read_bytes(straight.path() / "checkpoints" / "epoch_0003.ckpt"), read_bytes(split.path() / "checkpoints" / "epoch_0003.ckpt"));
}

TEST(Trainer, RunIsByteReproducible) {
    TempDir x("rep_a"), y("rep_b");
    auto cfg = tiny_config();
    auto videos = tiny_videos(6, 4, false);
    auto a = init_train_state(cfg), b = init_train_state(cfg);
    Trainer(cfg, videos).run(a, x.path());
    Trainer(cfg, videos).run(b, y.path());
    for (const char* f : {"train_log.tsv", "last.ckpt", "checkpoints/epoch_0001.ckpt", "checkpoints/epoch_0002.ckpt"}) {
        EXPECT_EQ(read_bytes(x.path() / f), read_bytes(y.path() / f)) << f;
        EXPECT_FALSE(read_bytes(x.path() / f).empty()) << f;
    }
}

TEST(Trainer, BatchDependsOnlyOnSeedAndStep) {
    auto cfg = tiny_config();
    cfg.view.gate_probability = 1.0;
    Trainer tr(cfg, tiny_videos(7, 3, false));
    bool g1 = false, g2 = false;
    const auto a = tr.make_batch(5, g1), b = tr.make_batch(5, g2);
    ASSERT_TRUE(g1);
    ASSERT_EQ(a.size(), 2u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(ino::test::to_vec(a[i].globals[0].cast<double>()), ino::test::to_vec(b[i].globals[0].cast<double>()));
        ASSERT_EQ(a[i].masks.size(), 2u);
        EXPECT_EQ(a[i].masks[0].cells, b[i].masks[0].cells);
    }
}

TEST(Trainer, EpochOrderIsPermutation) {
    auto cfg = tiny_config();
    Trainer tr(cfg, tiny_videos(8, 5, false));
    for (std::size_t e = 0; e < 4; ++e) {
        auto o = tr.epoch_order(e);
        std::sort(o.begin(), o.end());
        for (std::size_t i = 0; i < o.size(); ++i) EXPECT_EQ(o[i], i);
    }
}

TEST(Trainer, NonFiniteStepsSkipThenAbort) {
    auto cfg = tiny_config();
    Trainer tr(cfg, tiny_videos(9, 3, false));
    auto s = init_train_state(cfg);
    s.student.tensors()[0].mutable_data()[0] = std::numeric_limits<float>::quiet_NaN();
    auto r = tr.step(s);
    EXPECT_TRUE(r.skipped);
    EXPECT_EQ(s.step, 1u);
    EXPECT_EQ(s.opt.step, 0u);
    tr.step(s);
    EXPECT_THROW(tr.step(s), TrainingAborted);
}

TEST(Trainer, RejectsMaskedTrainingVideos) {
    EXPECT_THROW(Trainer(tiny_config(), tiny_videos(10, 2, true)), std::invalid_argument);
    EXPECT_THROW(Trainer(tiny_config(), {}), std::invalid_argument);
}

// ---- evaluation

TEST(Evaluate, OracleFeaturesScorePerfectly) {
    auto videos = tiny_videos(11, 4, true, 5);
    PropagationConfig prop;
    prop.radius = 24;
    auto s = evaluate_videos(videos, oracle_features(24, 24), prop);
    EXPECT_EQ(s.jf_mean, 1.0);
    EXPECT_EQ(s.j_mean, 1.0);
    EXPECT_EQ(s.f_mean, 1.0);
}

TEST(Evaluate, UntrainedEncoderScoresInRange) {
    auto cfg = tiny_config();
    auto videos = tiny_videos(12, 2, true, 4);
    auto s = evaluate_videos(videos, encoder_features(init_train_state(cfg).student, cfg.model), cfg.prop);
    ASSERT_FALSE(s.tracks.empty());
    for (double v : {s.jf_mean, s.j_mean, s.f_mean, s.j_recall, s.f_recall}) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    std::ostringstream os;
    write_report(os, s);
    EXPECT_NE(os.str().find("global\t"), std::string::npos);
}

TEST(Evaluate, ReportIsReproducible) {
    auto cfg = tiny_config();
    auto videos = tiny_videos(13, 2, true, 4);
    std::ostringstream a, b;
    write_report(a, evaluate_videos(videos, encoder_features(init_train_state(cfg).student, cfg.model), cfg.prop));
    write_report(b, evaluate_videos(videos, encoder_features(init_train_state(cfg).student, cfg.model), cfg.prop));
    EXPECT_EQ(a.str(), b.str());
}

TEST(Evaluate, OneTrackPerObjectAndMissingMask) {
    auto videos = tiny_videos(14, 1, true, 3);
    const auto objects = videos[0].masks[0].max_id();
    auto tracks = score_video(videos[0], videos[0].masks);
    EXPECT_EQ(tracks.size(), objects);
    for (const auto& t : tracks) EXPECT_EQ(t.j, (std::vector<double>{1, 1, 1}));
    videos[0].masks.clear();
    EXPECT_THROW(segment_video(videos[0], oracle_features(24, 24), PropagationConfig{}), std::invalid_argument);
}
