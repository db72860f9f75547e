#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "stripekit/metrics.hpp"

using namespace stripekit;
using namespace stripekit::metrics;

namespace {

// gt is the first `gt_n` pixels of a 1-row strip; pred covers `inside` of
// them plus `outside` pixels past the gt run.
std::pair<BinaryMask, BinaryMask> strip(int gt_n, int inside, int outside) {
    const int w = gt_n + outside + 2;
    BinaryMask gt(w, 1);
    BinaryMask pred(w, 1);
    for (int u = 0; u < gt_n; ++u) gt.set(u, 0);
    for (int u = 0; u < inside; ++u) pred.set(u, 0);
    for (int u = 0; u < outside; ++u) pred.set(gt_n + 1 + u, 0);
    return {pred, gt};
}

}  // namespace

TEST(ScorePair, DiceIouIdentityIsExact) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 500; ++t) {
        const BinaryMask gt = oracle::random_mask(rng, 24, 24, 0.2);
        const BinaryMask pred = oracle::random_mask(rng, 24, 24, 0.05 + 0.01 * (t % 50));
        if (!gt.any()) continue;
        const PairScores s = score_pair(pred, gt);
        ASSERT_EQ(s.dice, 2.0 * s.iou / (1.0 + s.iou));
    }
}

TEST(ScorePair, MatchesCountFormulas) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
        const BinaryMask gt = oracle::random_mask(rng, 16, 16, 0.3);
        const BinaryMask pred = oracle::random_mask(rng, 16, 16, 0.3);
        std::size_t inter = 0, p = 0, g = 0;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            inter += pred[i] && gt[i];
            p += pred[i];
            g += gt[i];
        }
        const PairScores s = score_pair(pred, gt);
        EXPECT_NEAR(s.dice, 2.0 * double(inter) / double(p + g), 1e-15);
        EXPECT_NEAR(s.iou, double(inter) / double(p + g - inter), 1e-15);
        EXPECT_EQ(s.false_alarm_pixels, p - inter);
    }
}

TEST(ScorePair, SelfOverlapIsPerfect) {
    std::mt19937_64 rng(9);
    const BinaryMask m = oracle::random_mask(rng, 20, 20, 0.4);
    const PairScores s = score_pair(m, m);
    EXPECT_EQ(s.dice, 1.0);
    EXPECT_EQ(s.iou, 1.0);
    EXPECT_TRUE(s.detected);
    EXPECT_EQ(s.false_alarm_pixels, 0u);
}

TEST(ScorePair, EmptyPredictionScoresZero) {
    const auto [pred, gt] = strip(10, 0, 0);
    const PairScores s = score_pair(pred, gt);
    EXPECT_EQ(s.dice, 0.0);
    EXPECT_EQ(s.iou, 0.0);
    EXPECT_FALSE(s.detected);
}

TEST(ScorePair, DetectionBoundaryAtHalfIou) {
    {
        const auto [pred, gt] = strip(10, 5, 0);  // 5 / 10
        const PairScores s = score_pair(pred, gt);
        EXPECT_EQ(s.iou, 0.5);
        EXPECT_FALSE(s.detected);
    }
    {
        const auto [pred, gt] = strip(10, 6, 0);  // 6 / 10
        EXPECT_TRUE(score_pair(pred, gt).detected);
    }
    {
        const auto [pred, gt] = strip(10, 4, 0);  // 4 / 10
        EXPECT_FALSE(score_pair(pred, gt).detected);
    }
    {
        const auto [pred, gt] = strip(10, 10, 10);  // 10 / 20
        EXPECT_FALSE(score_pair(pred, gt).detected);
    }
    {
        const auto [pred, gt] = strip(10, 10, 9);  // 10 / 19
        EXPECT_TRUE(score_pair(pred, gt).detected);
    }
}

TEST(ScorePair, UndefinedWithoutTarget) {
    EXPECT_THROW(score_pair(BinaryMask(4, 4), BinaryMask(4, 4)), UndefinedTargetError);
    EXPECT_THROW(score_pair(BinaryMask(4, 4), BinaryMask(5, 4)), ShapeError);
}

TEST(Aggregate, MeansPdAndPooledFa) {
    const auto [p1, g1] = strip(10, 10, 0);
    const auto [p2, g2] = strip(10, 5, 2);
    std::vector<PairScores> scores{score_pair(p1, g1), score_pair(p2, g2)};
    scores[0].group = "sun";
    scores[1].group = "moon";
    const MetricReport r = aggregate(scores);
    EXPECT_EQ(r.overall.images, 2u);
    EXPECT_NEAR(r.overall.mean_dice, 100.0 * (1.0 + scores[1].dice) / 2.0, 1e-12);
    EXPECT_NEAR(r.overall.miou, 100.0 * (1.0 + scores[1].iou) / 2.0, 1e-12);
    EXPECT_EQ(r.overall.pd, 50.0);
    EXPECT_NEAR(r.overall.fa, 2.0 / double(g1.size() + g2.size()), 1e-15);
    ASSERT_EQ(r.by_group.size(), 2u);
    EXPECT_EQ(r.by_group.at("sun").pd, 100.0);
    EXPECT_EQ(r.by_group.at("moon").pd, 0.0);
}

TEST(Aggregate, IndependentOfOrder) {
    std::mt19937_64 rng(13);
    std::vector<PairScores> scores;
    for (int t = 0; t < 40; ++t) {
        BinaryMask gt = oracle::random_mask(rng, 12, 12, 0.3);
        gt.set(0, 0);
        scores.push_back(score_pair(oracle::random_mask(rng, 12, 12, 0.3), gt));
    }
    const Aggregate a = aggregate(scores).overall;
    std::shuffle(scores.begin(), scores.end(), rng);
    const Aggregate b = aggregate(scores).overall;
    EXPECT_EQ(a.mean_dice, b.mean_dice);
    EXPECT_EQ(a.miou, b.miou);
    EXPECT_EQ(a.pd, b.pd);
    EXPECT_EQ(a.fa, b.fa);
}

TEST(Aggregate, EmptyListThrows) { EXPECT_THROW(aggregate({}), std::invalid_argument); }
