#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stripekit/filters.hpp"
#include "stripekit/geometry.hpp"
#include "stripekit/image.hpp"
#include "stripekit/losses.hpp"
#include "stripekit/random.hpp"

namespace stripekit::detect {

/// Probability emitted for "definitely background" pixels; segmenter outputs
/// stay inside the open interval (0, 1).
inline constexpr double kLowProb = 0.01;
inline constexpr double kHighProb = 0.99;

// ---------------------------------------------------------------------------
// Oriented matched filters

struct FilterBank {
    int orientations = 8;
    int kernel_length = 21;
    double kernel_sigma = 1.5;
    int background_radius = 7;  // median window half-size used for background removal

    void validate() const {
        if (orientations < 4) throw std::invalid_argument("FilterBank: need at least 4 orientations");
        if (kernel_length < 3 || kernel_length % 2 == 0)
            throw std::invalid_argument("FilterBank: kernel_length must be odd and >= 3");
        if (!(kernel_sigma > 0.0)) throw std::invalid_argument("FilterBank: kernel_sigma must be > 0");
    }

    double angle(int k) const { return std::numbers::pi * double(k) / double(orientations); }

    /// Zero-mean, unit-L2 line kernel over a disk of diameter kernel_length.
    filters::Kernel kernel(int k) const {
        filters::Kernel out;
        out.radius = kernel_length / 2;
        const int r = out.radius;
        const double c = std::cos(angle(k));
        const double s = std::sin(angle(k));
        std::vector<double> taps;
        std::vector<bool> inside;
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                const bool in = dx * dx + dy * dy <= r * r;
                const double d = -dx * s + dy * c;
                taps.push_back(in ? std::exp(-d * d / (2.0 * kernel_sigma * kernel_sigma)) : 0.0);
                inside.push_back(in);
            }
        double mean = 0.0;
        double n = 0.0;
        for (std::size_t i = 0; i < taps.size(); ++i)
            if (inside[i]) {
                mean += taps[i];
                n += 1.0;
            }
        mean /= n;
        double norm = 0.0;
        for (std::size_t i = 0; i < taps.size(); ++i)
            if (inside[i]) {
                taps[i] -= mean;
                norm += taps[i] * taps[i];
            }
        norm = std::sqrt(norm);
        for (double& t : taps) t /= norm;
        out.taps = std::move(taps);
        return out;
    }
};

struct OrientedResponses {
    GrayImage residual;               // image minus its median background
    std::vector<GrayImage> response;  // one map per orientation, in residual units
    GrayImage max_response;
    std::vector<int> argmax;
    double noise_sigma = 0.0;  // robust sigma of the residual (floored)
};

inline constexpr double kNoiseFloor = 1e-6;

inline OrientedResponses oriented_responses(const GrayImage& img, const FilterBank& bank) {
    bank.validate();
    if (bank.kernel_length > img.width() || bank.kernel_length > img.height())
        throw std::invalid_argument("matched filter: kernel larger than image");
    OrientedResponses out;
    out.residual = filters::subtract(img, filters::median(img, bank.background_radius));
    out.noise_sigma = std::max(filters::robust_sigma(out.residual), kNoiseFloor);
    out.max_response = GrayImage(img.width(), img.height(), -std::numeric_limits<double>::infinity());
    out.argmax.assign(img.size(), 0);
    for (int k = 0; k < bank.orientations; ++k) {
        out.response.push_back(filters::correlate(out.residual, bank.kernel(k)));
        const GrayImage& r = out.response.back();
        for (std::size_t i = 0; i < r.size(); ++i)
            if (r[i] > out.max_response[i]) {
                out.max_response[i] = r[i];
                out.argmax[i] = k;
            }
    }
    return out;
}

inline constexpr double kRelativeThreshold = 0.6;

struct MatchedFilterParams {
    double threshold = 4.0;  // in units of the residual noise sigma
    double scale = 1.0;
    // with a prompt, the threshold is raised to this fraction of the peak
    // response within prompt_radius of the point
    double relative_threshold = kRelativeThreshold;
    double prompt_radius = 10.0;
};

/// Largest value of `map` within `radius` of `point`.
inline double local_peak(const GrayImage& map, Pixel point, double radius) {
    double peak = -std::numeric_limits<double>::infinity();
    const int r = int(std::ceil(radius));
    for (int v = point.v - r; v <= point.v + r; ++v)
        for (int u = point.u - r; u <= point.u + r; ++u) {
            if (!map.contains(u, v)) continue;
            const double du = u - point.u;
            const double dv = v - point.v;
            if (du * du + dv * dv <= radius * radius) peak = std::max(peak, map(u, v));
        }
    return peak;
}

inline GrayImage squash(const GrayImage& max_response, double noise_sigma, const MatchedFilterParams& p) {
    GrayImage out(max_response.width(), max_response.height());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(sigmoid((max_response[i] / noise_sigma - p.threshold) / p.scale), kLowProb * 0.1,
                            1.0 - kLowProb * 0.1);
    return out;
}

/// Median background removal, oriented zero-mean line filters, per-pixel
/// maximum, logistic squash of the noise-normalized response.
inline GrayImage matched_filter_segment(const GrayImage& img, const FilterBank& bank = {},
                                        const MatchedFilterParams& p = {}) {
    const OrientedResponses r = oriented_responses(img, bank);
    return squash(r.max_response, r.noise_sigma, p);
}

// ---------------------------------------------------------------------------
// Hough baseline

struct HoughParams {
    int denoise_radius = 1;       // median pre-filter
    double binarize_sigma = 3.0;  // residual threshold in noise-sigma units
    double min_level = 0.0;       // absolute floor on the residual threshold
    double theta_step_deg = 1.0;
    double rho_step = 1.0;
    int min_votes = 15;
    double capsule_halfwidth = 2.5;
};

struct HoughResult {
    GrayImage prob;
    bool found = false;
    double theta = 0.0;  // normal direction of the peak line, [0, pi)
    double rho = 0.0;
    int votes = 0;
    double line_angle = 0.0;  // direction of the line itself, [0, pi)
    BinaryMask binary;        // thresholded residual that voted
};

inline HoughResult hough_detect(const GrayImage& img, const HoughParams& p = {}, int background_radius = 7) {
    HoughResult out;
    out.prob = GrayImage(img.width(), img.height(), kLowProb);
    const GrayImage denoised = p.denoise_radius > 0 ? filters::median(img, p.denoise_radius) : img;
    const GrayImage residual = filters::subtract(denoised, filters::median(denoised, background_radius));
    const double sigma = std::max(filters::robust_sigma(residual), kNoiseFloor);
    const double level = std::max(p.binarize_sigma * sigma, p.min_level);
    out.binary = binarize(residual, level);
    const auto pts = positive_pixels(out.binary);
    if (pts.empty()) return out;

    const int n_theta = std::max(1, int(std::lround(180.0 / p.theta_step_deg)));
    const double rho_max = std::hypot(double(img.width()), double(img.height()));
    const int n_rho = int(std::ceil(2.0 * rho_max / p.rho_step)) + 1;
    std::vector<double> cs(n_theta), sn(n_theta);
    for (int t = 0; t < n_theta; ++t) {
        const double th = std::numbers::pi * double(t) / double(n_theta);
        cs[t] = std::cos(th);
        sn[t] = std::sin(th);
    }
    std::vector<int> acc(std::size_t(n_theta) * std::size_t(n_rho), 0);
    for (const Pixel& q : pts)
        for (int t = 0; t < n_theta; ++t) {
            const double rho = q.u * cs[t] + q.v * sn[t];
            const int r = int(std::lround((rho + rho_max) / p.rho_step));
            ++acc[std::size_t(t) * std::size_t(n_rho) + std::size_t(r)];
        }
    const auto best = std::max_element(acc.begin(), acc.end());
    out.votes = *best;
    if (out.votes < p.min_votes) return out;
    const auto idx = std::size_t(best - acc.begin());
    const int t = int(idx / std::size_t(n_rho));
    const int r = int(idx % std::size_t(n_rho));
    out.found = true;
    out.theta = std::numbers::pi * double(t) / double(n_theta);
    out.rho = double(r) * p.rho_step - rho_max;
    out.line_angle = geometry::fold_angle(-sn[t], cs[t]);

    // extent of the supporting pixels along the line
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Pixel& q : pts) {
        const double d = q.u * cs[t] + q.v * sn[t] - out.rho;
        if (std::abs(d) > p.capsule_halfwidth) continue;
        const double along = -q.u * sn[t] + q.v * cs[t];
        lo = std::min(lo, along);
        hi = std::max(hi, along);
    }
    for (const Pixel& q : pts) {
        const double d = q.u * cs[t] + q.v * sn[t] - out.rho;
        const double along = -q.u * sn[t] + q.v * cs[t];
        if (std::abs(d) > p.capsule_halfwidth || along < lo || along > hi) continue;
        const double hw = p.capsule_halfwidth;
        out.prob(q.u, q.v) = 0.5 + 0.49 * std::exp(-d * d / (2.0 * hw * hw));
    }
    return out;
}

/// Median denoising, residual binarization, (rho, theta) voting, then a soft
/// capsule around the strongest line restricted to above-threshold pixels.
inline GrayImage hough_segment(const GrayImage& img, const HoughParams& p = {}) { return hough_detect(img, p).prob; }

// ---------------------------------------------------------------------------
// Prompt selection

inline constexpr double kDefaultPromptRadius = 10.0;

/// Keeps the connected region of the binarized map that contains `point`, or
/// the region nearest to it within `radius`. Returns an empty mask otherwise.
inline BinaryMask prompt_select(const GrayImage& prob, Pixel point, double threshold = 0.5,
                                double radius = kDefaultPromptRadius) {
    if (!prob.contains(point.u, point.v)) throw std::invalid_argument("prompt_select: point outside frame");
    std::vector<int> labels;
    const auto regions = geometry::connected_components(binarize(prob, threshold), &labels);
    BinaryMask out(prob.width(), prob.height());
    int chosen = labels[prob.index(point.u, point.v)];
    if (chosen < 0) {
        double best = radius * radius;
        for (const auto& region : regions)
            for (const Pixel& q : region.pixels) {
                const double d2 = double(q.u - point.u) * (q.u - point.u) + double(q.v - point.v) * (q.v - point.v);
                if (d2 < best || (d2 == best && chosen < 0)) {
                    best = d2;
                    chosen = region.id;
                }
            }
    }
    if (chosen < 0) return out;
    for (const Pixel& q : regions[std::size_t(chosen)].pixels) out.set(q.u, q.v);
    return out;
}

// ---------------------------------------------------------------------------
// Feature stack and the trainable pixel classifier

/// Per-pixel features: one response per orientation, the max response, the
/// orientation contrast (max minus mean response), 7x7 local mean and std of
/// the residual, and a white top-hat. All are divided by the residual noise
/// sigma, so the stack is invariant to intensity offsets and gain, then
/// compressed with asinh so bright targets do not dominate the gradient.
/// Two more channels give each pixel's fraction of the 7x7 local peak, for
/// the max response and for the 3x3-smoothed residual.
struct FeatureStack {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> values;  // pixel-major: values[i * channels + c]

    std::span<const float> at(std::size_t i) const {
        return {values.data() + i * std::size_t(channels), std::size_t(channels)};
    }
};

inline constexpr int kLocalRadius = 3;
inline constexpr int kTophatRadius = 3;
inline int feature_count(const FilterBank& bank) { return bank.orientations + 7; }
inline float compress(double x) { return float(std::asinh(x)); }

/// Value over its local peak, in [0,1]; peaks below one noise sigma count as one.
inline double peak_fraction(double x, double peak) { return std::max(x, 0.0) / std::max(peak, 1.0); }

struct PreparedImage {
    GrayImage image;
    FeatureStack features;
    GrayImage max_response;  // noise-normalized, for the matched-filter segmenter
};

inline PreparedImage prepare(GrayImage img, const FilterBank& bank = {}) {
    PreparedImage out;
    const OrientedResponses r = oriented_responses(img, bank);
    const double inv = 1.0 / r.noise_sigma;
    const auto stats = filters::local_stats(r.residual, kLocalRadius);
    const GrayImage tophat = filters::white_tophat(img, kTophatRadius);
    const GrayImage smooth = filters::local_stats(r.residual, 1).mean;
    const GrayImage smooth_peak = filters::dilate(smooth, kLocalRadius);
    const GrayImage response_peak = filters::dilate(r.max_response, kLocalRadius);
    const int k = bank.orientations;
    FeatureStack& f = out.features;
    f.width = img.width();
    f.height = img.height();
    f.channels = feature_count(bank);
    f.values.resize(img.size() * std::size_t(f.channels));
    out.max_response = GrayImage(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) {
        float* row = f.values.data() + i * std::size_t(f.channels);
        double sum = 0.0;
        for (int c = 0; c < k; ++c) {
            const double x = r.response[std::size_t(c)][i] * inv;
            row[c] = compress(x);
            sum += x;
        }
        const double mx = r.max_response[i] * inv;
        row[k] = compress(mx);
        row[k + 1] = compress(mx - sum / k);
        row[k + 2] = compress(stats.mean[i] * inv);
        row[k + 3] = compress(stats.stddev[i] * inv);
        row[k + 4] = compress(tophat[i] * inv);
        row[k + 5] = float(peak_fraction(r.max_response[i] * inv, response_peak[i] * inv));
        row[k + 6] = float(peak_fraction(smooth[i] * inv, smooth_peak[i] * inv));
        out.max_response[i] = mx;
    }
    out.image = std::move(img);
    return out;
}

class UntrainedModelError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Logistic model over the feature stack: p = sigmoid(w . (f * kFeatureScale) + b).
struct LiteModel {
    static constexpr double kFeatureScale = 0.2;

    std::vector<double> weights;
    double bias = 0.0;
    bool trained = false;
    bool prompted = false;  // last weight applies to the prompt channel

    static constexpr double kInitialGain = 3.0;
    static constexpr double kInitialThreshold = 4.0;  // noise sigmas
    static constexpr double kPromptGain = 10.0;

    /// Untrained starting point: fires where the max oriented response
    /// exceeds about 4 noise sigmas.
    static LiteModel initial(const FilterBank& bank = {}) {
        LiteModel m;
        m.weights.assign(std::size_t(feature_count(bank)), 0.0);
        m.weights[std::size_t(bank.orientations)] = kInitialGain / kFeatureScale;
        m.bias = -kInitialGain * std::asinh(kInitialThreshold);
        return m;
    }

    /// Prompted starting point: reproduces the prompted matched filter's
    /// cut (response above max(4 sigma, 0.6 of the peak near the point)).
    static LiteModel initial_prompted(const FilterBank& bank = {}) {
        LiteModel m;
        m.prompted = true;
        m.weights.assign(std::size_t(feature_count(bank)) + 1, 0.0);
        m.weights.back() = kPromptGain / kFeatureScale;
        m.bias = -kPromptGain * kRelativeThreshold;
        return m;
    }

    std::size_t feature_channels() const { return weights.size() - (prompted ? 1 : 0); }

    double logit(std::span<const float> f, float extra = 0.0f) const {
        double z = bias;
        const std::size_t n = feature_channels();
        for (std::size_t c = 0; c < n; ++c) z += weights[c] * kFeatureScale * double(f[c]);
        if (prompted) z += weights[n] * kFeatureScale * double(extra);
        return z;
    }

    bool finite() const {
        return std::isfinite(bias) &&
               std::all_of(weights.begin(), weights.end(), [](double w) { return std::isfinite(w); });
    }
};

inline constexpr double kPromptReach = 48.0;

/// Max response over its peak near the prompt, zero beyond `reach` pixels
/// from the prompt. The peak is floored so that the relative cut never drops
/// below the absolute 4 sigma threshold.
inline std::vector<float> prompt_channel(const PreparedImage& img, Pixel prompt,
                                         double radius = kDefaultPromptRadius, double reach = kPromptReach) {
    const GrayImage& mr = img.max_response;
    if (!mr.contains(prompt.u, prompt.v)) throw std::invalid_argument("prompt_channel: prompt outside the frame");
    const double floor = LiteModel::kInitialThreshold / kRelativeThreshold;
    const double peak = std::max(local_peak(mr, prompt, radius), floor);
    std::vector<float> out(mr.size(), 0.0f);
    for (int v = 0; v < mr.height(); ++v)
        for (int u = 0; u < mr.width(); ++u) {
            const double du = u - prompt.u;
            const double dv = v - prompt.v;
            if (du * du + dv * dv <= reach * reach) out[mr.index(u, v)] = float(std::max(mr(u, v), 0.0) / peak);
        }
    return out;
}

inline void check_model_shape(const LiteModel& model, const FeatureStack& f, const std::vector<float>* extra) {
    if (model.weights.empty() || model.feature_channels() != std::size_t(f.channels))
        throw std::invalid_argument("lite model: weight count does not match feature channels");
    if (model.prompted && (!extra || extra->size() != std::size_t(f.width) * std::size_t(f.height)))
        throw std::invalid_argument("lite model: prompted model needs a prompt channel");
}

inline GrayImage lite_forward(const LiteModel& model, const FeatureStack& f, const std::vector<float>* extra = nullptr) {
    check_model_shape(model, f, extra);
    GrayImage out(f.width, f.height);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = sigmoid(model.logit(f.at(i), model.prompted ? (*extra)[i] : 0.0f));
    return out;
}

/// Per-pixel probability map of a trained model. The map is clamped into
/// [1e-6, 1 - 1e-6] so downstream code always sees the open interval.
/// Prompted models require `prompt`; others ignore it.
inline GrayImage lite_segment(const LiteModel& model, const PreparedImage& img,
                              std::optional<Pixel> prompt = std::nullopt) {
    if (!model.trained) throw UntrainedModelError("lite_segment: model has not been trained");
    GrayImage p;
    if (model.prompted) {
        if (!prompt) throw std::invalid_argument("lite_segment: prompted model needs a prompt");
        const auto extra = prompt_channel(img, *prompt);
        p = lite_forward(model, img.features, &extra);
    } else {
        p = lite_forward(model, img.features);
    }
    for (double& x : p.pixels()) x = std::clamp(x, 1e-6, 1.0 - 1e-6);
    return p;
}

struct ModelGradient {
    std::vector<double> weights;
    double bias = 0.0;
};

/// Chain rule from dLoss/dp to the model parameters.
inline ModelGradient lite_backward(const LiteModel& model, const FeatureStack& f, const GrayImage& prob,
                                   const GrayImage& dloss_dprob, const std::vector<float>* extra = nullptr) {
    check_model_shape(model, f, extra);
    ModelGradient g{std::vector<double>(model.weights.size(), 0.0), 0.0};
    const std::size_t n = model.feature_channels();
    for (std::size_t i = 0; i < prob.size(); ++i) {
        const double dz = dloss_dprob[i] * prob[i] * (1.0 - prob[i]);
        if (dz == 0.0) continue;
        const auto row = f.at(i);
        for (std::size_t c = 0; c < n; ++c) g.weights[c] += dz * LiteModel::kFeatureScale * double(row[c]);
        if (model.prompted) g.weights[n] += dz * LiteModel::kFeatureScale * double((*extra)[i]);
        g.bias += dz;
    }
    return g;
}

struct TrainingExample {
    const PreparedImage* image = nullptr;
    const BinaryMask* label = nullptr;
    std::optional<Pixel> prompt;  // required by prompted models
};

struct TrainOptions {
    int epochs = 40;
    double learning_rate = 0.5;
    double momentum = 0.9;
    int batch_size = 10;  // 0 = full batch
    std::uint64_t seed = 0;
    geometry::Objective objective = geometry::Objective::geodice;
    // adapter-style fine-tuning: feature weights stay frozen, only the bias
    // and (for prompted models) the prompt weight move
    bool adapter_only = false;
};

struct TrainResult {
    LiteModel model;
    std::vector<double> loss_trace;  // full-dataset mean loss of the best parameters so far, per epoch
};

class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError(const std::string& what, std::vector<double> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const std::vector<double>& trace() const { return trace_; }

private:
    std::vector<double> trace_;
};

/// Loss and parameter gradient of one example under the given objective.
inline std::pair<double, ModelGradient> example_gradient(const LiteModel& model, const TrainingExample& ex,
                                                         geometry::Objective objective,
                                                         const geometry::LossConfig& cfg) {
    std::vector<float> extra;
    if (model.prompted) {
        if (!ex.prompt) throw std::invalid_argument("lite_train: prompted model needs prompts");
        extra = prompt_channel(*ex.image, *ex.prompt);
    }
    const std::vector<float>* ep = model.prompted ? &extra : nullptr;
    const GrayImage p = lite_forward(model, ex.image->features, ep);
    const geometry::LossResult loss = geometry::objective_loss(objective, p, *ex.label, cfg);
    return {loss.value, lite_backward(model, ex.image->features, p, loss.grad, ep)};
}

/// Mean loss of `model` over `data` without gradients.
inline double dataset_loss(const LiteModel& model, std::span<const TrainingExample> data,
                           geometry::Objective objective, const geometry::LossConfig& cfg) {
    double total = 0.0;
    for (const auto& ex : data) {
        std::vector<float> extra;
        if (model.prompted) {
            if (!ex.prompt) throw std::invalid_argument("lite_train: prompted model needs prompts");
            extra = prompt_channel(*ex.image, *ex.prompt);
        }
        const GrayImage p = lite_forward(model, ex.image->features, model.prompted ? &extra : nullptr);
        total += geometry::objective_loss(objective, p, *ex.label, cfg).value;
    }
    return total / double(data.size());
}

/// Gradient descent with momentum on the mean loss over `data`, warm-started
/// from `model`. Batches are drawn in a seed-determined order and reduced in
/// a fixed order, so results are reproducible bit-for-bit. After each epoch
/// the full-dataset loss is measured; the parameters with the lowest loss
/// seen so far, the starting ones included, are the ones returned.
inline TrainResult lite_train(LiteModel model, std::span<const TrainingExample> data, const geometry::LossConfig& cfg,
                              const TrainOptions& opt) {
    if (data.empty()) throw std::invalid_argument("lite_train: empty dataset");
    cfg.validate();
    TrainResult out;
    std::vector<double> vel_w(model.weights.size(), 0.0);
    double vel_b = 0.0;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(opt.seed, {0x747261696e}));  // "train"
    const std::size_t batch = opt.batch_size > 0 ? std::size_t(opt.batch_size) : data.size();
    LiteModel best = model;
    double best_loss = opt.epochs > 0 ? dataset_loss(model, data, opt.objective, cfg) : 0.0;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        if (batch < data.size())
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            ModelGradient acc{std::vector<double>(model.weights.size(), 0.0), 0.0};
            for (std::size_t j = start; j < stop; ++j) {
                const ModelGradient g = example_gradient(model, data[order[j]], opt.objective, cfg).second;
                for (std::size_t c = 0; c < acc.weights.size(); ++c) acc.weights[c] += g.weights[c];
                acc.bias += g.bias;
            }
            const double n = double(stop - start);
            const std::size_t first = opt.adapter_only ? model.feature_channels() : 0;
            for (std::size_t c = first; c < model.weights.size(); ++c) {
                vel_w[c] = opt.momentum * vel_w[c] - opt.learning_rate * acc.weights[c] / n;
                model.weights[c] += vel_w[c];
            }
            vel_b = opt.momentum * vel_b - opt.learning_rate * acc.bias / n;
            model.bias += vel_b;
        }
        const double loss = model.finite() ? dataset_loss(model, data, opt.objective, cfg)
                                          : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(loss))
            throw TrainingDivergedError("lite_train: loss diverged at epoch " + std::to_string(epoch), out.loss_trace);
        if (loss < best_loss) {
            best = model;
            best_loss = loss;
        }
        out.loss_trace.push_back(best_loss);
    }
    best.trained = true;
    out.model = std::move(best);
    return out;
}

inline constexpr const char* kModelHeader = "stripekit-lite-model";
inline constexpr int kModelVersion = 1;

/// Plain-text model file: a version header line, then `trained`, `prompted`,
/// `bias` and `weights` lines. Values are written with round-trip precision.
inline std::string model_to_text(const LiteModel& m) {
    std::ostringstream ss;
    ss << kModelHeader << ' ' << kModelVersion << '\n';
    ss << std::setprecision(17);
    ss << "trained " << (m.trained ? 1 : 0) << '\n';
    ss << "prompted " << (m.prompted ? 1 : 0) << '\n';
    ss << "bias " << m.bias << '\n';
    ss << "weights " << m.weights.size();
    for (double w : m.weights) ss << ' ' << w;
    ss << '\n';
    return ss.str();
}

inline LiteModel model_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    int version = 0;
    if (!(in >> header >> version) || header != kModelHeader)
        throw std::invalid_argument("model file: missing '" + std::string(kModelHeader) + "' header");
    if (version != kModelVersion) throw std::invalid_argument("model file: unsupported version " + std::to_string(version));
    LiteModel m;
    std::string key;
    int trained = 0;
    std::size_t n = 0;
    int prompted = 0;
    if (!(in >> key >> trained) || key != "trained") throw std::invalid_argument("model file: expected 'trained'");
    if (!(in >> key >> prompted) || key != "prompted") throw std::invalid_argument("model file: expected 'prompted'");
    if (!(in >> key >> m.bias) || key != "bias") throw std::invalid_argument("model file: expected 'bias'");
    if (!(in >> key >> n) || key != "weights") throw std::invalid_argument("model file: expected 'weights'");
    m.weights.resize(n);
    for (double& w : m.weights)
        if (!(in >> w)) throw std::invalid_argument("model file: truncated weight list");
    m.trained = trained != 0;
    m.prompted = prompted != 0;
    if (m.weights.size() < (m.prompted ? 2u : 1u)) throw std::invalid_argument("model file: too few weights");
    if (!m.finite()) throw std::invalid_argument("model file: non-finite parameters");
    return m;
}

// ---------------------------------------------------------------------------
// Segmenter interface

struct Capabilities {
    bool prompted = false;
    bool trainable = false;
};

class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual std::string name() const = 0;
    virtual Capabilities capabilities() const = 0;
    /// Probability map with the input's dimensions and values in (0,1).
    /// Prompted segmenters use `prompt`; others ignore it.
    virtual GrayImage segment(const PreparedImage& img, std::optional<Pixel> prompt) const = 0;
    virtual void fit(std::span<const TrainingExample>) {
        throw std::logic_error(name() + ": segmenter is not trainable");
    }
};

class MatchedFilterSegmenter : public Segmenter {
public:
    explicit MatchedFilterSegmenter(MatchedFilterParams p = {}) : params_(p) {}
    std::string name() const override { return "matched"; }
    Capabilities capabilities() const override { return {true, false}; }
    GrayImage segment(const PreparedImage& img, std::optional<Pixel> prompt) const override {
        MatchedFilterParams p = params_;
        if (prompt && img.max_response.contains(prompt->u, prompt->v))
            p.threshold = std::max(p.threshold, p.relative_threshold * local_peak(img.max_response, *prompt, p.prompt_radius));
        return squash(img.max_response, 1.0, p);
    }

private:
    MatchedFilterParams params_;
};

class HoughSegmenter : public Segmenter {
public:
    explicit HoughSegmenter(HoughParams p = {}) : params_(p) {}
    std::string name() const override { return "hough"; }
    Capabilities capabilities() const override { return {false, false}; }
    GrayImage segment(const PreparedImage& img, std::optional<Pixel>) const override {
        return hough_segment(img.image, params_);
    }

private:
    HoughParams params_;
};

class LiteSegmenter : public Segmenter {
public:
    LiteSegmenter(LiteModel model, geometry::LossConfig loss, TrainOptions opt)
        : model_(std::move(model)), loss_(loss), opt_(opt) {}
    std::string name() const override { return model_.prompted ? "prompted-lite" : "lite"; }
    Capabilities capabilities() const override { return {model_.prompted, true}; }
    GrayImage segment(const PreparedImage& img, std::optional<Pixel> prompt) const override {
        return lite_segment(model_, img, prompt);
    }
    void fit(std::span<const TrainingExample> data) override {
        TrainResult r = lite_train(model_, data, loss_, opt_);
        model_ = std::move(r.model);
        traces_.push_back(std::move(r.loss_trace));
        ++fits_;
        opt_.seed = mix_seed(opt_.seed);
    }

    const LiteModel& model() const { return model_; }
    const std::vector<std::vector<double>>& traces() const { return traces_; }
    int fits() const { return fits_; }

private:
    LiteModel model_;
    geometry::LossConfig loss_;
    TrainOptions opt_;
    std::vector<std::vector<double>> traces_;
    int fits_ = 0;
};

}  // namespace stripekit::detect
