#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ino/propagation/propagate.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ino;
using ino::test::brute_force;
using ino::test::random_features;
using ino::test::random_soft_labels;

namespace {

LabelMap<double> one_hot(const std::vector<int>& ids, std::size_t h, std::size_t w, std::size_t classes) {
    LabelMap<double> l{h, w, classes, std::vector<double>(h * w * classes, 0.0)};
    for (std::size_t i = 0; i < h * w; ++i) l.probs[i * classes + static_cast<std::size_t>(ids[i])] = 1.0;
    return l;
}

PropagationConfig cfg_of(std::size_t k, std::size_t r, std::size_t nc = 10) {
    PropagationConfig c;
    c.top_k = k;
    c.radius = r;
    c.context_frames = nc;
    return c;
}

}  // namespace

// ---- init_labels

TEST(InitLabels, UniformBackground) {
    auto l = init_labels<double>(MaskRaster(8, 8), 4, 4, 2);
    for (std::size_t i = 0; i < 16; ++i) {
        EXPECT_EQ(l.cell(i)[0], 1.0);
        EXPECT_EQ(l.cell(i)[1], 0.0);
    }
}

TEST(InitLabels, AlignedMaskTransfersExactly) {
    MaskRaster m(4, 4);
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 2; x < 4; ++x) m.at(y, x) = 2;
    for (std::size_t y = 2; y < 4; ++y)
        for (std::size_t x = 0; x < 2; ++x) m.at(y, x) = 1;
    auto l = init_labels<double>(m, 2, 2);
    EXPECT_EQ(l.classes, 3u);
    EXPECT_EQ(l, one_hot({0, 2, 1, 0}, 2, 2, 3));
}

TEST(InitLabels, MajorityAndTies) {
    MaskRaster m(2, 4);
    m.at(0, 0) = 1;  // cell 0: 3 bg + 1 object
    m.at(0, 2) = 1;  // cell 1: 2 bg + 2 object, tie to background
    m.at(1, 3) = 1;
    auto l = init_labels<double>(m, 1, 2, 2);
    EXPECT_EQ(l, one_hot({0, 0}, 1, 2, 2));
    m.at(0, 3) = 1;
    EXPECT_EQ(init_labels<double>(m, 1, 2, 2), one_hot({0, 1}, 1, 2, 2));
}

TEST(InitLabels, Errors) {
    EXPECT_THROW(init_labels<double>(MaskRaster(), 1, 1), std::invalid_argument);
    EXPECT_THROW(init_labels<double>(MaskRaster(2, 2), 4, 4), std::invalid_argument);
    EXPECT_THROW(init_labels<double>(MaskRaster(2, 2, 3), 1, 1, 2), std::invalid_argument);
}

// ---- propagate_frame

TEST(PropagateFrame, SelfMatchCopiesLabels) {
    Rng rng(1);
    auto f = random_features(rng, 6, 5, 8);
    auto lab = random_soft_labels(rng, 6, 5, 3);
    auto out = propagate_frame(f, {{&f, &lab}}, cfg_of(1, 40));
    for (std::size_t i = 0; i < lab.probs.size(); ++i) EXPECT_NEAR(out.probs[i], lab.probs[i], 1e-15);
}

TEST(PropagateFrame, EqualSimilaritySplitsEvenly) {
    // two context cells with the same feature as the target cell
    FeatureMap<double> f{1, 2, 2, {1, 0, 1, 0}, 0};
    auto lab = one_hot({0, 1}, 1, 2, 2);
    auto out = propagate_frame(f, {{&f, &lab}}, cfg_of(2, 1));
    EXPECT_DOUBLE_EQ(out.probs[0], 0.5);
    EXPECT_DOUBLE_EQ(out.probs[1], 0.5);
}

TEST(PropagateFrame, FewerCandidatesThanTopK) {
    Rng rng(2);
    auto f = random_features(rng, 2, 2, 4);
    auto lab = random_soft_labels(rng, 2, 2, 2);
    auto out = propagate_frame(f, {{&f, &lab}}, cfg_of(50, 1));
    EXPECT_EQ(out.probs, brute_force(f, {{&f, &lab}}, 50, 1, 0.07).probs);
}

TEST(PropagateFrame, Errors) {
    Rng rng(3);
    auto f = random_features(rng, 3, 3, 4), g = random_features(rng, 3, 4, 4);
    auto lab = random_soft_labels(rng, 3, 3, 2);
    EXPECT_THROW(propagate_frame(f, {}, cfg_of(5, 2)), std::invalid_argument);
    EXPECT_THROW(propagate_frame(f, {{&g, &lab}}, cfg_of(5, 2)), ShapeError);
    EXPECT_THROW(propagate_frame(f, {{&f, &lab}}, cfg_of(0, 2)), std::invalid_argument);
    EXPECT_THROW(propagate_frame(f, {{&f, &lab}}, cfg_of(5, 0)), std::invalid_argument);
}

TEST(PropagateFrame, MatchesBruteForceBitwiseProperty) {
    Rng rng(4);
    int instances = 0;
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t h = trial < 100 ? 16 : 8 + rng.below(17), w = trial < 100 ? 16 : 8 + rng.below(17);
        const std::size_t d = 2 + rng.below(7), frames = 1 + rng.below(3), classes = 2 + rng.below(3);
        const std::size_t radius = std::array<std::size_t, 4>{2, 3, 5, 40}[rng.below(4)];
        const std::size_t k = 1 + rng.below(6);
        const std::size_t palette = trial % 3 == 0 ? 3 : 0;
        auto target = random_features(rng, h, w, d, palette);
        std::vector<FeatureMap<double>> fm;
        std::vector<LabelMap<double>> lm;
        for (std::size_t c = 0; c < frames; ++c) {
            fm.push_back(random_features(rng, h, w, d, palette));
            lm.push_back(random_soft_labels(rng, h, w, classes));
        }
        std::vector<ContextEntry<double>> ctx;
        for (std::size_t c = 0; c < frames; ++c) ctx.push_back({&fm[c], &lm[c]});
        const auto got = propagate_frame(target, ctx, cfg_of(k, radius));
        const auto want = brute_force(target, ctx, k, radius, 0.07);
        ASSERT_EQ(got.probs, want.probs) << "trial " << trial;
        ++instances;
    }
    EXPECT_GE(instances, 100);
}

TEST(PropagateFrame, OutputsAreConvexCombinationsProperty) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto t = random_features(rng, 7, 9, 5);
        auto f = random_features(rng, 7, 9, 5);
        auto l = random_soft_labels(rng, 7, 9, 4);
        auto out = propagate_frame(t, {{&f, &l}}, cfg_of(1 + rng.below(8), 1 + rng.below(4)));
        for (std::size_t i = 0; i < 63; ++i) {
            double s = 0;
            for (std::size_t c = 0; c < 4; ++c) {
                EXPECT_GE(out.cell(i)[c], 0.0);
                EXPECT_LE(out.cell(i)[c], 1.0);
                s += out.cell(i)[c];
            }
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
    }
}

TEST(PropagateFrame, ThreadPartitionIndependentProperty) {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        auto t = random_features(rng, 13, 11, 6, trial % 2 ? 4 : 0);
        auto f1 = random_features(rng, 13, 11, 6), f2 = random_features(rng, 13, 11, 6);
        auto l1 = random_soft_labels(rng, 13, 11, 3), l2 = random_soft_labels(rng, 13, 11, 3);
        auto cfg = cfg_of(5, 3);
        const auto serial = propagate_frame(t, {{&f1, &l1}, {&f2, &l2}}, cfg);
        for (std::size_t th : {2u, 3u, 8u, 64u}) {
            cfg.threads = th;
            EXPECT_EQ(propagate_frame(t, {{&f1, &l1}, {&f2, &l2}}, cfg).probs, serial.probs) << th;
        }
    }
}

TEST(PropagateFrame, LargeRadiusEqualsUnrestrictedProperty) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t h = 3 + rng.below(10), w = 3 + rng.below(10);
        auto t = random_features(rng, h, w, 4);
        auto f = random_features(rng, h, w, 4);
        auto l = random_soft_labels(rng, h, w, 3);
        const auto a = propagate_frame(t, {{&f, &l}}, cfg_of(5, std::max(h, w)));
        const auto b = propagate_frame(t, {{&f, &l}}, cfg_of(5, 1000));
        EXPECT_EQ(a.probs, b.probs);
    }
}

// ---- propagate_video

TEST(PropagateVideo, SingleFrameReturnsInitialLabels) {
    Rng rng(8);
    std::vector<FeatureMap<double>> frames{random_features(rng, 4, 4, 4)};
    auto first = random_soft_labels(rng, 4, 4, 2);
    auto out = propagate_video(frames, first, cfg_of(5, 2));
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0], first);
}

TEST(PropagateVideo, ZeroContextUsesFirstFrameOnly) {
    Rng rng(9);
    std::vector<FeatureMap<double>> frames;
    for (int t = 0; t < 5; ++t) frames.push_back(random_features(rng, 6, 6, 4));
    auto first = random_soft_labels(rng, 6, 6, 3);
    const auto cfg = cfg_of(3, 2, 0);
    auto out = propagate_video(frames, first, cfg);
    ASSERT_EQ(out.size(), 5u);
    for (std::size_t t = 1; t < 5; ++t) EXPECT_EQ(out[t].probs, propagate_frame(frames[t], {{&frames[0], &first}}, cfg).probs);
}

TEST(PropagateVideo, ContextWindowMatchesBruteForce) {
    Rng rng(10);
    std::vector<FeatureMap<double>> frames;
    for (int t = 0; t < 7; ++t) frames.push_back(random_features(rng, 8, 8, 5));
    auto first = random_soft_labels(rng, 8, 8, 3);
    auto out = propagate_video(frames, first, cfg_of(4, 3, 2));
    std::vector<LabelMap<double>> ref{first};
    for (std::size_t t = 1; t < frames.size(); ++t) {
        std::vector<ContextEntry<double>> ctx{{&frames[0], &ref[0]}};
        for (std::size_t s = t >= 3 ? t - 2 : 1; s < t; ++s) ctx.push_back({&frames[s], &ref[s]});
        ref.push_back(brute_force(frames[t], ctx, 4, 3, 0.07));
    }
    for (std::size_t t = 0; t < frames.size(); ++t) EXPECT_EQ(out[t].probs, ref[t].probs) << t;
}

TEST(PropagateVideo, ConstantVideoKeepsFirstFrameArgmax) {
    Rng rng(11);
    auto f = random_features(rng, 8, 8, 32);
    std::vector<FeatureMap<double>> frames(6, f);
    std::vector<int> ids(64);
    for (auto& v : ids) v = static_cast<int>(rng.below(3));
    auto first = one_hot(ids, 8, 8, 3);
    auto out = propagate_video(frames, first, cfg_of(5, 3, 10));
    const auto want = hard_mask(first, 8, 8);
    for (const auto& l : out) EXPECT_EQ(hard_mask(l, 8, 8), want);
}

TEST(HardMask, NearestUpsampling) {
    auto l = one_hot({0, 1, 2, 1}, 2, 2, 3);
    auto m = hard_mask(l, 4, 6);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 6; ++x) EXPECT_EQ(m.at(y, x), static_cast<int>(std::vector<int>{0, 1, 2, 1}[(y / 2) * 2 + x / 3]));
}

TEST(HardMask, TiesGoToLowerId) {
    LabelMap<double> l{1, 1, 3, {0.2, 0.4, 0.4}};
    EXPECT_EQ(hard_mask(l, 1, 1).at(0, 0), 1);
}
