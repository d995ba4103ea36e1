#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ino/metrics/jf.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ino;
using ino::test::f_oracle;

namespace {

MaskRaster square(std::size_t n, std::size_t y0, std::size_t x0, std::size_t side, std::uint8_t id = 1) {
    MaskRaster m(n, n);
    for (std::size_t y = y0; y < y0 + side; ++y)
        for (std::size_t x = x0; x < x0 + side; ++x) m.at(y, x) = id;
    return m;
}

MaskRaster random_mask(Rng& rng, std::size_t h, std::size_t w, double p) {
    MaskRaster m(h, w);
    for (auto& v : m.ids) v = rng.uniform() < p;
    return m;
}

}  // namespace

TEST(RegionJ, Examples) {
    auto a = square(8, 2, 2, 4);
    EXPECT_EQ(region_similarity_J(a, a, 1), 1.0);
    EXPECT_EQ(region_similarity_J(square(8, 0, 0, 2), square(8, 5, 5, 2), 1), 0.0);
    EXPECT_DOUBLE_EQ(region_similarity_J(square(8, 2, 3, 4), a, 1), 12.0 / 20.0);
    EXPECT_EQ(region_similarity_J(MaskRaster(4, 4), MaskRaster(4, 4), 1), 1.0);
    EXPECT_EQ(region_similarity_J(MaskRaster(4, 4), square(4, 0, 0, 1), 1), 0.0);
    EXPECT_THROW(region_similarity_J(MaskRaster(4, 4), MaskRaster(4, 5), 1), std::invalid_argument);
}

TEST(RegionJ, SelectsObjectId) {
    auto m = square(6, 0, 0, 2, 1);
    m.at(5, 5) = 2;
    auto p = m;
    p.at(0, 0) = 0;
    EXPECT_EQ(region_similarity_J(p, m, 2), 1.0);
    EXPECT_DOUBLE_EQ(region_similarity_J(p, m, 1), 0.75);
}

TEST(RegionJ, SymmetricBoundedAndExactProperty) {
    Rng rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        auto a = random_mask(rng, 1 + rng.below(12), 1 + rng.below(12), rng.uniform());
        auto b = random_mask(rng, a.height, a.width, rng.uniform());
        const double j = region_similarity_J(a, b, 1);
        EXPECT_EQ(j, region_similarity_J(b, a, 1));
        EXPECT_GE(j, 0.0);
        EXPECT_LE(j, 1.0);
        EXPECT_EQ(j == 1.0, binary_mask(a, 1) == binary_mask(b, 1));
    }
}

TEST(ContourF, Examples) {
    auto a = square(16, 4, 4, 6);
    EXPECT_EQ(contour_accuracy_F(a, a, 1), 1.0);
    EXPECT_EQ(contour_accuracy_F(MaskRaster(16, 16), a, 1), 0.0);
    EXPECT_EQ(contour_accuracy_F(MaskRaster(16, 16), MaskRaster(16, 16), 1), 1.0);
    EXPECT_THROW(contour_accuracy_F(a, MaskRaster(4, 4), 1), std::invalid_argument);
}

TEST(ContourF, ConcentricRingAgainstDistanceOracle) {
    // 6x6 prediction around a 4x4 truth: outer boundary one ring out
    const auto truth = square(10, 3, 3, 4), pred = square(10, 2, 2, 6);
    const double got = contour_accuracy_F(pred, truth, 1, 1);
    EXPECT_NEAR(got, f_oracle(pred, truth, 1.0), 1e-9);
    // 20 predicted boundary pixels, 4 corners at distance sqrt(2); all 12 truth pixels matched
    EXPECT_NEAR(got, 2 * (16.0 / 20) * 1.0 / (16.0 / 20 + 1.0), 1e-12);
    EXPECT_EQ(contour_accuracy_F(pred, truth, 1, 2), 1.0);
}

TEST(ContourF, DilationMatchesDistanceOracleProperty) {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t h = 2 + rng.below(14), w = 2 + rng.below(14);
        auto a = random_mask(rng, h, w, rng.uniform(0.1, 0.9)), b = random_mask(rng, h, w, rng.uniform(0.1, 0.9));
        const std::size_t tol = 1 + rng.below(3);
        EXPECT_NEAR(contour_accuracy_F(a, b, 1, tol), f_oracle(a, b, static_cast<double>(tol)), 1e-9);
    }
}

TEST(ContourF, SymmetricBoundedMonotoneProperty) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_mask(rng, 12, 12, rng.uniform(0.1, 0.6)), b = random_mask(rng, 12, 12, rng.uniform(0.1, 0.6));
        double prev = 2.0;
        for (std::size_t tol = 4; tol >= 1; --tol) {
            const double f = contour_accuracy_F(a, b, 1, tol);
            EXPECT_EQ(f, contour_accuracy_F(b, a, 1, tol));
            EXPECT_GE(f, 0.0);
            EXPECT_LE(f, 1.0);
            EXPECT_LE(f, prev);
            prev = f;
        }
    }
}

TEST(ContourF, ToleranceFromDiagonal) {
    EXPECT_EQ(boundary_tolerance(480, 854), 8u);
    EXPECT_EQ(boundary_tolerance(32, 32), 1u);
    EXPECT_EQ(boundary_tolerance(1, 1), 1u);
}

TEST(Aggregate, AllOnes) {
    std::vector<ObjectTrack> t{{"a", 1, {1, 1, 1}, {1, 1, 1}}, {"b", 2, {1, 1}, {1, 1}}};
    auto s = aggregate(t);
    EXPECT_EQ(s.jf_mean, 1.0);
    EXPECT_EQ(s.j_mean, 1.0);
    EXPECT_EQ(s.f_mean, 1.0);
    EXPECT_EQ(s.j_recall, 1.0);
    EXPECT_EQ(s.f_recall, 1.0);
}

TEST(Aggregate, RecallStraddlesThreshold) {
    std::vector<ObjectTrack> t{{"a", 1, {1, 0.6}, {1, 0.6}}, {"a", 2, {1, 0.4}, {1, 0.4}}};
    auto s = aggregate(t);
    EXPECT_EQ(s.j_recall, 0.5);
    EXPECT_EQ(s.f_recall, 0.5);
}

TEST(Aggregate, TwoObjectsThreeFramesTable) {
    std::vector<ObjectTrack> t{{"seq", 1, {1.0, 0.8, 0.6}, {1.0, 0.7, 0.5}}, {"seq", 2, {1.0, 0.4, 0.2}, {1.0, 0.9, 0.5}}};
    auto s = aggregate(t);
    // frame 0 is excluded
    EXPECT_NEAR(s.tracks[0].j_mean, 0.7, 1e-12);
    EXPECT_NEAR(s.tracks[0].f_mean, 0.6, 1e-12);
    EXPECT_NEAR(s.tracks[1].j_mean, 0.3, 1e-12);
    EXPECT_NEAR(s.tracks[1].f_mean, 0.7, 1e-12);
    EXPECT_NEAR(s.j_mean, 0.5, 1e-12);
    EXPECT_NEAR(s.f_mean, 0.65, 1e-12);
    EXPECT_EQ(s.j_recall, 0.5);
    EXPECT_EQ(s.f_recall, 1.0);
    EXPECT_NEAR(s.jf_mean, 0.575, 1e-12);
    auto with_first = aggregate(t, false);
    EXPECT_NEAR(with_first.j_mean, (2.4 / 3 + 1.6 / 3) / 2, 1e-12);
}

TEST(Aggregate, Errors) {
    EXPECT_THROW(aggregate({}), std::invalid_argument);
    EXPECT_THROW(aggregate({{"a", 1, {1}, {1}}}), std::invalid_argument);
    EXPECT_THROW(aggregate({{"a", 1, {1, 1}, {1}}}), std::invalid_argument);
}

TEST(Report, ColumnOrder) {
    std::vector<ObjectTrack> t{{"seq", 1, {1.0, 0.8}, {1.0, 0.4}}};
    std::ostringstream os;
    write_report(os, aggregate(t));
    const std::string r = os.str();
    EXPECT_NE(r.find("sequence\tobject\tJ_m\tF_m\n"), std::string::npos);
    EXPECT_NE(r.find("seq\t1\t0.800000\t0.400000\n"), std::string::npos);
    EXPECT_NE(r.find("#\tJ&F_m\tJ_m\tJ_r\tF_m\tF_r\n"), std::string::npos);
    EXPECT_NE(r.find("global\t0.600000\t0.800000\t1.000000\t0.400000\t0.000000\n"), std::string::npos);
}
