#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "stripekit/image.hpp"

namespace stripekit::metrics {

class UndefinedTargetError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct PairScores {
    std::string id;
    std::string group;  // stray-light family, empty when unknown
    std::size_t intersection = 0;
    std::size_t pred_pixels = 0;
    std::size_t gt_pixels = 0;
    double dice = 0.0;
    double iou = 0.0;
    bool detected = false;
    std::size_t false_alarm_pixels = 0;
    std::size_t total_pixels = 0;
};

/// Overlap scores for one prediction against its ground truth.
/// A target counts as detected when IoU > 0.5, decided on integer counts.
inline PairScores score_pair(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_shape(pred, gt, "score_pair");
    PairScores s;
    s.total_pixels = gt.size();
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool p = pred[i];
        const bool g = gt[i];
        s.intersection += (p && g);
        s.pred_pixels += p;
        s.gt_pixels += g;
        s.false_alarm_pixels += (p && !g);
    }
    if (s.gt_pixels == 0) throw UndefinedTargetError("score_pair: ground truth has no target pixels");
    const std::size_t uni = s.pred_pixels + s.gt_pixels - s.intersection;
    s.iou = double(s.intersection) / double(uni);
    // written through iou so the identity dice = 2 iou / (1 + iou) holds bit-for-bit
    s.dice = 2.0 * s.iou / (1.0 + s.iou);
    s.detected = 2 * s.intersection > uni;
    return s;
}

struct Aggregate {
    std::size_t images = 0;
    double mean_dice = 0.0;  // percent
    double miou = 0.0;       // percent
    double pd = 0.0;         // percent
    double fa = 0.0;         // pooled ratio; multiply by 1e3 for the usual reporting unit
};

struct MetricReport {
    Aggregate overall;
    std::map<std::string, Aggregate> by_group;
    std::vector<PairScores> per_image;
};

inline Aggregate aggregate_scores(const std::vector<const PairScores*>& scores) {
    if (scores.empty()) throw std::invalid_argument("aggregate: empty score list");
    Aggregate a;
    a.images = scores.size();
    std::size_t detected = 0;
    std::size_t fa = 0;
    std::size_t total = 0;
    std::vector<double> dice;
    std::vector<double> iou;
    for (const PairScores* s : scores) {
        dice.push_back(s->dice);
        iou.push_back(s->iou);
        detected += s->detected;
        fa += s->false_alarm_pixels;
        total += s->total_pixels;
    }
    // summing in sorted order makes the result independent of input order
    std::sort(dice.begin(), dice.end());
    std::sort(iou.begin(), iou.end());
    const double n = double(scores.size());
    a.mean_dice = 100.0 * std::accumulate(dice.begin(), dice.end(), 0.0) / n;
    a.miou = 100.0 * std::accumulate(iou.begin(), iou.end(), 0.0) / n;
    a.pd = 100.0 * double(detected) / n;
    a.fa = total ? double(fa) / double(total) : 0.0;
    return a;
}

/// Means over images for Dice/mIoU, detected fraction for Pd, pooled
/// false-alarm pixels over pooled pixels for Fa; also broken down by group.
inline MetricReport aggregate(std::vector<PairScores> scores) {
    if (scores.empty()) throw std::invalid_argument("aggregate: empty score list");
    MetricReport r;
    r.per_image = std::move(scores);
    std::vector<const PairScores*> all;
    std::map<std::string, std::vector<const PairScores*>> groups;
    for (const auto& s : r.per_image) {
        all.push_back(&s);
        if (!s.group.empty()) groups[s.group].push_back(&s);
    }
    r.overall = aggregate_scores(all);
    for (const auto& [g, list] : groups) r.by_group[g] = aggregate_scores(list);
    return r;
}

}  // namespace stripekit::metrics
