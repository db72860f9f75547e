#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "stripekit/geometry.hpp"
#include "stripekit/image.hpp"

namespace stripekit::geometry {

struct LossConfig {
    double alpha = 1.0;    // weight of the alignment term
    double lambda = 1.0;   // weight of the dice term
    double epsilon = 1.0;  // dice / soft-IoU smoothing
    double binarize_threshold = 0.5;
    double focal_gamma = 2.0;

    void validate() const {
        if (!(alpha >= 0.0) || !(lambda >= 0.0) || !(alpha + lambda > 0.0))
            throw std::invalid_argument("LossConfig: need alpha >= 0, lambda >= 0, alpha + lambda > 0");
        if (!(epsilon > 0.0)) throw std::invalid_argument("LossConfig: epsilon must be > 0");
        if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0))
            throw std::invalid_argument("LossConfig: binarize_threshold must lie in (0,1)");
        if (!(focal_gamma >= 0.0)) throw std::invalid_argument("LossConfig: focal_gamma must be >= 0");
    }
};

/// Scalar loss plus its gradient with respect to every predicted probability.
struct LossResult {
    double value = 0.0;
    GrayImage grad;
};

/// Orientation of the label's dominant (largest) region, if it has one.
inline std::optional<double> label_angle(const BinaryMask& label) {
    const auto regions = connected_components(label);
    if (regions.empty()) return std::nullopt;
    return farthest_pair(regions.front()).angle;
}

/// Per-region breakdown of the alignment loss, exposed for inspection and tests.
struct AlignmentTerm {
    double angle = 0.0;          // predicted region's longest-chord angle
    double normalized_diff = 0;  // folded angle difference / (pi/2), in [0,1]
    double mean_prob = 0.0;      // mean predicted probability over the region
    std::size_t area = 0;
};

/// Geometric alignment loss for one image.
///
/// The prediction is binarized at cfg.binarize_threshold and split into
/// 8-connected regions. Each region contributes its folded angle difference to
/// the label's longest chord, scaled to [0,1] by pi/2, times the region's mean
/// probability. The loss is the mean contribution over regions (0 when nothing
/// is predicted or the label is empty). The angles are piecewise constant in
/// the probabilities, so the gradient flows only through the mean-probability
/// factor.
inline LossResult geo_alignment_loss(const GrayImage& pred, const BinaryMask& label, const LossConfig& cfg = {},
                                     std::vector<AlignmentTerm>* terms = nullptr) {
    require_same_shape(pred, label, "geo_alignment_loss");
    LossResult out{0.0, GrayImage(pred.width(), pred.height())};
    const auto target = label_angle(label);
    if (!target) return out;
    const auto regions = connected_components(binarize(pred, cfg.binarize_threshold));
    if (regions.empty()) return out;

    const double m = static_cast<double>(regions.size());
    constexpr double half_pi = std::numbers::pi / 2.0;
    for (const auto& region : regions) {
        const double angle = farthest_pair(region).angle;
        const double diff = std::min(1.0, folded_difference(angle, *target) / half_pi);
        double sum = 0.0;
        for (const auto& p : region.pixels) sum += pred(p.u, p.v);
        const double area = static_cast<double>(region.area());
        const double mean = sum / area;
        out.value += diff * mean / m;
        const double g = diff / (m * area);
        for (const auto& p : region.pixels) out.grad(p.u, p.v) = g;
        if (terms) terms->push_back({angle, diff, mean, region.area()});
    }
    return out;
}

/// 1 - (2 sum w p g + eps) / (sum w p^2 + sum w g^2 + eps). Uniform weights
/// unless `weights` is given.
inline LossResult weighted_dice_loss(const GrayImage& pred, const BinaryMask& label, double epsilon = 1.0,
                                     const GrayImage* weights = nullptr) {
    require_same_shape(pred, label, "weighted_dice_loss");
    if (weights) require_same_shape(pred, *weights, "weighted_dice_loss weights");
    double inter = 0.0;
    double denom = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double w = weights ? (*weights)[i] : 1.0;
        const double g = label[i] ? 1.0 : 0.0;
        inter += w * pred[i] * g;
        denom += w * (pred[i] * pred[i] + g * g);
    }
    const double num = 2.0 * inter + epsilon;
    const double den = denom + epsilon;
    LossResult out{1.0 - num / den, GrayImage(pred.width(), pred.height())};
    const double inv_den2 = 1.0 / (den * den);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double w = weights ? (*weights)[i] : 1.0;
        const double g = label[i] ? 1.0 : 0.0;
        out.grad[i] = -(2.0 * w * g * den - num * 2.0 * w * pred[i]) * inv_den2;
    }
    return out;
}

/// 1 - (sum p g + eps) / (sum p + sum g - sum p g + eps).
inline LossResult soft_iou_loss(const GrayImage& pred, const BinaryMask& label, double epsilon = 1.0) {
    require_same_shape(pred, label, "soft_iou_loss");
    double inter = 0.0;
    double sp = 0.0;
    double sg = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double g = label[i] ? 1.0 : 0.0;
        inter += pred[i] * g;
        sp += pred[i];
        sg += g;
    }
    const double num = inter + epsilon;
    const double den = sp + sg - inter + epsilon;
    LossResult out{1.0 - num / den, GrayImage(pred.width(), pred.height())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double g = label[i] ? 1.0 : 0.0;
        out.grad[i] = -(g * den - num * (1.0 - g)) / (den * den);
    }
    return out;
}

inline constexpr double kFocalClamp = 1e-7;

/// Pixel-mean focal loss; gamma = 0 is binary cross-entropy.
inline LossResult focal_loss(const GrayImage& pred, const BinaryMask& label, double gamma = 2.0) {
    require_same_shape(pred, label, "focal_loss");
    if (!(gamma >= 0.0)) throw std::invalid_argument("focal_loss: gamma must be >= 0");
    const double n = static_cast<double>(pred.size());
    LossResult out{0.0, GrayImage(pred.width(), pred.height())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double raw = pred[i];
        const double p = std::clamp(raw, kFocalClamp, 1.0 - kFocalClamp);
        const bool clamped = p != raw;
        double value = 0.0;
        double d = 0.0;
        if (label[i]) {
            const double q = 1.0 - p;
            value = -std::pow(q, gamma) * std::log(p);
            d = -std::pow(q, gamma) / p + (gamma > 0.0 ? gamma * std::pow(q, gamma - 1.0) * std::log(p) : 0.0);
        } else {
            value = -std::pow(p, gamma) * std::log(1.0 - p);
            d = std::pow(p, gamma) / (1.0 - p) - (gamma > 0.0 ? gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p) : 0.0);
        }
        out.value += value / n;
        out.grad[i] = clamped ? 0.0 : d / n;
    }
    return out;
}

inline LossResult combine(double a, LossResult x, double b, const LossResult& y) {
    x.value = a * x.value + b * y.value;
    for (std::size_t i = 0; i < x.grad.size(); ++i) x.grad[i] = a * x.grad[i] + b * y.grad[i];
    return x;
}

/// alpha * alignment + lambda * weighted dice. A zero weight skips its term
/// entirely, so alpha = 0 is bit-identical to the dice loss scaled by lambda.
inline LossResult geodice_loss(const GrayImage& pred, const BinaryMask& label, const LossConfig& cfg = {}) {
    cfg.validate();
    if (cfg.alpha == 0.0) {
        LossResult d = weighted_dice_loss(pred, label, cfg.epsilon);
        if (cfg.lambda != 1.0) {
            d.value *= cfg.lambda;
            for (std::size_t i = 0; i < d.grad.size(); ++i) d.grad[i] *= cfg.lambda;
        }
        return d;
    }
    LossResult g = geo_alignment_loss(pred, label, cfg);
    if (cfg.lambda == 0.0) {
        g.value *= cfg.alpha;
        for (std::size_t i = 0; i < g.grad.size(); ++i) g.grad[i] *= cfg.alpha;
        return g;
    }
    return combine(cfg.alpha, std::move(g), cfg.lambda, weighted_dice_loss(pred, label, cfg.epsilon));
}

/// Training objectives covered by the loss ablation.
enum class Objective { geodice, dice, soft_iou, dice_focal, soft_iou_focal };

inline std::string to_string(Objective o) {
    switch (o) {
        case Objective::geodice: return "geodice";
        case Objective::dice: return "dice";
        case Objective::soft_iou: return "soft_iou";
        case Objective::dice_focal: return "dice_focal";
        case Objective::soft_iou_focal: return "soft_iou_focal";
    }
    return "?";
}

inline Objective objective_from_string(const std::string& s) {
    for (auto o : {Objective::geodice, Objective::dice, Objective::soft_iou, Objective::dice_focal,
                   Objective::soft_iou_focal})
        if (to_string(o) == s) return o;
    throw std::invalid_argument("unknown objective '" + s + "'");
}

inline LossResult objective_loss(Objective o, const GrayImage& pred, const BinaryMask& label, const LossConfig& cfg) {
    switch (o) {
        case Objective::geodice: return geodice_loss(pred, label, cfg);
        case Objective::dice: return weighted_dice_loss(pred, label, cfg.epsilon);
        case Objective::soft_iou: return soft_iou_loss(pred, label, cfg.epsilon);
        case Objective::dice_focal:
            return combine(1.0, weighted_dice_loss(pred, label, cfg.epsilon), 1.0, focal_loss(pred, label, cfg.focal_gamma));
        case Objective::soft_iou_focal:
            return combine(1.0, soft_iou_loss(pred, label, cfg.epsilon), 1.0, focal_loss(pred, label, cfg.focal_gamma));
    }
    throw std::logic_error("objective_loss: unreachable");
}

}  // namespace stripekit::geometry
