#include <gtest/gtest.h>

#include <cmath>

#include "stripekit/image.hpp"
#include "stripekit/random.hpp"

using namespace stripekit;

TEST(GrayImage, RowMajorIndexing) {
    GrayImage img(4, 3);
    img(1, 2) = 0.5;
    EXPECT_EQ(img.index(1, 2), 9u);
    EXPECT_DOUBLE_EQ(img[9], 0.5);
    EXPECT_TRUE(img.contains(3, 2));
    EXPECT_FALSE(img.contains(4, 0));
    EXPECT_FALSE(img.contains(0, -1));
}

TEST(GrayImage, RejectsBadShapes) {
    EXPECT_THROW(GrayImage(-1, 3), ShapeError);
    EXPECT_THROW(GrayImage(2, 2, std::vector<double>(3, 0.0)), ShapeError);
    EXPECT_THROW(BinaryMask(3, -2), ShapeError);
}

TEST(BinaryMask, CountAndAny) {
    BinaryMask m(5, 5);
    EXPECT_FALSE(m.any());
    m.set(2, 2);
    m.set(4, 0);
    EXPECT_EQ(m.count(), 2u);
    m.set(2, 2, false);
    EXPECT_EQ(m.count(), 1u);
}

TEST(Binarize, StrictlyAboveThreshold) {
    GrayImage img(3, 1, std::vector<double>{0.49, 0.5, 0.51});
    const BinaryMask m = binarize(img, 0.5);
    EXPECT_FALSE(m[0]);
    EXPECT_FALSE(m[1]);
    EXPECT_TRUE(m[2]);
}

TEST(Binarize, RoundTripsThroughToImage) {
    Rng rng(3);
    BinaryMask m(17, 11);
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, uniform(rng, 0.0, 1.0) < 0.3);
    EXPECT_EQ(binarize(to_image(m), 0.5), m);
}

TEST(PositivePixels, ScanlineOrder) {
    BinaryMask m(3, 3);
    m.set(2, 0);
    m.set(0, 1);
    m.set(1, 2);
    const auto pts = positive_pixels(m);
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_EQ(pts[0], (Pixel{2, 0}));
    EXPECT_EQ(pts[1], (Pixel{0, 1}));
    EXPECT_EQ(pts[2], (Pixel{1, 2}));
}

TEST(Sigmoid, StableAtExtremes) {
    EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
    EXPECT_TRUE(std::isfinite(sigmoid(-1000.0)));
    EXPECT_NEAR(sigmoid(1000.0), 1.0, 1e-15);
    EXPECT_NEAR(sigmoid(2.0) + sigmoid(-2.0), 1.0, 1e-15);
}

TEST(Random, DeriveSeedSeparatesStreams) {
    EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
    EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
    EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
}

TEST(Random, UniformStaysInRange) {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        const double x = uniform(rng, -2.0, 3.0);
        ASSERT_GE(x, -2.0);
        ASSERT_LT(x, 3.0);
        const int k = uniform_int(rng, 4, 6);
        ASSERT_GE(k, 4);
        ASSERT_LE(k, 6);
    }
}
