#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "stripekit/geometry.hpp"

using namespace stripekit;
using namespace stripekit::geometry;

namespace {

std::vector<std::vector<std::size_t>> as_index_sets(const BinaryMask& m, const std::vector<ConnectedRegion>& regions) {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& r : regions) {
        std::vector<std::size_t> idx;
        for (const auto& p : r.pixels) idx.push_back(m.index(p.u, p.v));
        std::sort(idx.begin(), idx.end());
        out.push_back(std::move(idx));
    }
    std::sort(out.begin(), out.end());
    return out;
}

BinaryMask from_rows(const std::vector<std::string>& rows) {
    BinaryMask m(int(rows[0].size()), int(rows.size()));
    for (int v = 0; v < m.height(); ++v)
        for (int u = 0; u < m.width(); ++u)
            if (rows[std::size_t(v)][std::size_t(u)] == '#') m.set(u, v);
    return m;
}

}  // namespace

TEST(ConnectedComponents, MatchesFloodFillOnRandomMasks) {
    std::mt19937_64 rng(1234);
    for (int t = 0; t < 100; ++t) {
        const double density = 0.1 + 0.5 * double(t % 10) / 10.0;
        const BinaryMask m = oracle::random_mask(rng, 64, 64, density);
        ASSERT_EQ(as_index_sets(m, connected_components(m)), oracle::flood_fill(m)) << "mask " << t;
    }
}

TEST(ConnectedComponents, DiagonalNeighboursJoin) {
    const BinaryMask m = from_rows({"#..", ".#.", "..#"});
    EXPECT_EQ(connected_components(m).size(), 1u);
}

TEST(ConnectedComponents, OrderedByAreaThenScanline) {
    const BinaryMask m = from_rows({"#...##", "....##", "#.....", "......", "###..."});
    const auto regions = connected_components(m);
    ASSERT_EQ(regions.size(), 4u);
    EXPECT_EQ(regions[0].area(), 4u);
    EXPECT_EQ(regions[1].area(), 3u);
    EXPECT_EQ(regions[2].pixels.front(), (Pixel{0, 0}));
    EXPECT_EQ(regions[3].pixels.front(), (Pixel{0, 2}));
}

TEST(ConnectedComponents, LabelsAgreeWithRegions) {
    std::mt19937_64 rng(5);
    const BinaryMask m = oracle::random_mask(rng, 40, 30, 0.35);
    std::vector<int> labels;
    const auto regions = connected_components(m, &labels);
    for (const auto& r : regions)
        for (const auto& p : r.pixels) EXPECT_EQ(labels[m.index(p.u, p.v)], r.id);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(labels[i] < 0, !m[i]);
}

TEST(ConnectedAreaCheck, CountsOnlyRegionsAtLeastMinArea) {
    BinaryMask m = from_rows({"#####...", "........", "......#.", "........"});
    EXPECT_TRUE(connected_area_check(m, 5));
    EXPECT_FALSE(connected_area_check(m, 1));
    EXPECT_FALSE(connected_area_check(m, 6));
    EXPECT_FALSE(connected_area_check(BinaryMask(8, 4), 1));
}

TEST(ConnectedAreaCheck, IsInvariantUnderTranslation) {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 50; ++t) {
        const auto pts = oracle::random_region(rng, 60, 20);
        BinaryMask a(48, 48);
        BinaryMask b(48, 48);
        for (const auto& p : pts) {
            a.set(p.u, p.v);
            b.set(p.u + 17, p.v + 9);
        }
        EXPECT_EQ(connected_area_check(a, 5), connected_area_check(b, 5));
    }
}

TEST(FarthestPair, MatchesExhaustiveDiameter) {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 100; ++t) {
        const auto pts = oracle::random_region(rng, 512);
        const LineSegment s = farthest_pair(pts);
        const long du = s.p2.u - s.p1.u;
        const long dv = s.p2.v - s.p1.v;
        ASSERT_EQ(du * du + dv * dv, oracle::diameter_sq(pts)) << "region " << t;
    }
}

TEST(FarthestPair, LargeRegionsUseHullAndStayExact) {
    std::mt19937_64 rng(4242);
    for (int t = 0; t < 20; ++t) {
        auto pts = oracle::random_region(rng, 3000, 96);
        if (pts.size() <= kExhaustiveDiameterLimit) continue;
        const LineSegment s = farthest_pair(pts);
        const long du = s.p2.u - s.p1.u;
        const long dv = s.p2.v - s.p1.v;
        EXPECT_EQ(du * du + dv * dv, oracle::diameter_sq(pts)) << "region " << t;
    }
}

TEST(FarthestPair, SinglePixelIsDegenerate) {
    const LineSegment s = farthest_pair(std::vector<Pixel>{{3, 4}});
    EXPECT_TRUE(s.degenerate);
    EXPECT_EQ(s.length(), 0.0);
}

TEST(FarthestPair, AngleOfAxisAlignedBars) {
    std::vector<Pixel> row;
    std::vector<Pixel> col;
    for (int i = 0; i < 10; ++i) {
        row.push_back({i, 2});
        col.push_back({2, i});
    }
    EXPECT_NEAR(farthest_pair(row).angle, 0.0, 1e-12);
    EXPECT_NEAR(farthest_pair(col).angle, std::numbers::pi / 2, 1e-12);
}

TEST(FoldAngle, MapsIntoHalfOpenRange) {
    for (double a = -7.0; a < 7.0; a += 0.1) {
        const double f = fold_angle(std::cos(a), std::sin(a));
        ASSERT_GE(f, 0.0);
        ASSERT_LT(f, std::numbers::pi);
        EXPECT_NEAR(folded_difference(f, std::fmod(a + 4 * std::numbers::pi, std::numbers::pi)), 0.0, 1e-9);
    }
}

TEST(FoldedDifference, IsSymmetricAndBounded) {
    EXPECT_NEAR(folded_difference(0.1, std::numbers::pi - 0.1), 0.2, 1e-12);
    EXPECT_NEAR(folded_difference(0.0, std::numbers::pi / 2), std::numbers::pi / 2, 1e-12);
    EXPECT_DOUBLE_EQ(folded_difference(0.3, 1.2), folded_difference(1.2, 0.3));
}

TEST(MassCenter, RoundedCentroidOfBar) {
    const BinaryMask m = from_rows({"......", ".####.", "......"});
    // centroid (2.5, 1) rounds half away from zero
    EXPECT_EQ(mass_center(m), (Pixel{3, 1}));
}

TEST(MassCenter, SnapsToNearestPixelForConcaveShapes) {
    // ring: centroid (2,2) is a hole
    const BinaryMask m = from_rows({"#####", "#...#", "#...#", "#...#", "#####"});
    const Pixel c = mass_center(m);
    EXPECT_TRUE(m(c.u, c.v));
    EXPECT_EQ(c, (Pixel{2, 0}));
}

TEST(MassCenter, AlwaysInsideMask) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 200; ++t) {
        const auto pts = oracle::random_region(rng, 200, 32);
        BinaryMask m(32, 32);
        for (const auto& p : pts) m.set(p.u, p.v);
        const Pixel c = mass_center(m);
        ASSERT_TRUE(m(c.u, c.v));
    }
}

TEST(MassCenter, EmptyMaskThrows) { EXPECT_THROW(mass_center(BinaryMask(4, 4)), std::invalid_argument); }
