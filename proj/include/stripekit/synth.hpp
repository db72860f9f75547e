#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "stripekit/geometry.hpp"
#include "stripekit/image.hpp"
#include "stripekit/random.hpp"

namespace stripekit::synth {

enum class Profile { uniform, linear_ramp, gaussian_bump };
enum class StrayLight { sun, moon, earth, mixed };

inline constexpr std::array<StrayLight, 4> kAllFamilies{StrayLight::sun, StrayLight::moon, StrayLight::earth,
                                                        StrayLight::mixed};

inline std::string to_string(StrayLight s) {
    switch (s) {
        case StrayLight::sun: return "sun";
        case StrayLight::moon: return "moon";
        case StrayLight::earth: return "earth";
        case StrayLight::mixed: return "mixed";
    }
    return "?";
}

inline StrayLight stray_light_from_string(const std::string& s) {
    for (auto f : kAllFamilies)
        if (to_string(f) == s) return f;
    throw std::invalid_argument("unknown stray-light family '" + s + "'");
}

inline std::string to_string(Profile p) {
    switch (p) {
        case Profile::uniform: return "uniform";
        case Profile::linear_ramp: return "linear-ramp";
        case Profile::gaussian_bump: return "gaussian-bump";
    }
    return "?";
}

inline Profile profile_from_string(const std::string& s) {
    for (auto p : {Profile::uniform, Profile::linear_ramp, Profile::gaussian_bump})
        if (to_string(p) == s) return p;
    throw std::invalid_argument("unknown stripe profile '" + s + "'");
}

/// Brightness multiplier along the stripe, t in [0,1]. Peaks at 1.
inline double profile_gain(Profile p, double t) {
    switch (p) {
        case Profile::uniform: return 1.0;
        case Profile::linear_ramp: return 0.4 + 0.6 * t;
        case Profile::gaussian_bump: return std::exp(-(t - 0.5) * (t - 0.5) / (2.0 * 0.3 * 0.3));
    }
    return 1.0;
}

struct StripeParams {
    Point2 center;
    double length = 40.0;
    double width_sigma = 1.2;
    double angle = 0.0;  // [0, pi)
    double peak = 0.5;
    Profile profile = Profile::uniform;

    Point2 start() const {
        return {center.u - 0.5 * length * std::cos(angle), center.v - 0.5 * length * std::sin(angle)};
    }
    Point2 end() const {
        return {center.u + 0.5 * length * std::cos(angle), center.v + 0.5 * length * std::sin(angle)};
    }
};

class OutOfFrameError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void validate(const StripeParams& s) {
    if (!(s.angle >= 0.0 && s.angle < std::numbers::pi)) throw std::invalid_argument("stripe angle must lie in [0, pi)");
    if (!(s.length >= 0.0)) throw std::invalid_argument("stripe length must be >= 0");
    if (!(s.width_sigma > 0.0)) throw std::invalid_argument("stripe width_sigma must be > 0");
    if (!(s.peak > 0.0 && s.peak <= 1.0)) throw std::invalid_argument("stripe peak must lie in (0, 1]");
}

/// True when the 3-sigma capsule around the stripe lies inside the pixel grid.
inline bool fits_in_frame(const StripeParams& s, int w, int h) {
    const Point2 a = s.start();
    const Point2 b = s.end();
    const double r = 3.0 * s.width_sigma;
    return std::min(a.u, b.u) - r >= 0.0 && std::min(a.v, b.v) - r >= 0.0 &&
           std::max(a.u, b.u) + r <= double(w - 1) && std::max(a.v, b.v) + r <= double(h - 1);
}

/// Value of the continuous stripe model at (x, y), zero beyond 3 sigma.
inline double stripe_value(const StripeParams& s, double x, double y) {
    const Point2 a = s.start();
    const double du = std::cos(s.angle);
    const double dv = std::sin(s.angle);
    const double along = (x - a.u) * du + (y - a.v) * dv;
    const double clamped = std::clamp(along, 0.0, s.length);
    const double px = a.u + clamped * du;
    const double py = a.v + clamped * dv;
    const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
    const double r = 3.0 * s.width_sigma;
    if (d2 > r * r) return 0.0;
    const double t = s.length > 0.0 ? clamped / s.length : 0.5;
    return s.peak * profile_gain(s.profile, t) * std::exp(-d2 / (2.0 * s.width_sigma * s.width_sigma));
}

/// Additive target layer sampled at pixel centers.
inline GrayImage render_stripe(const StripeParams& s, int w, int h) {
    validate(s);
    if (!fits_in_frame(s, w, h)) throw OutOfFrameError("render_stripe: stripe capsule leaves the frame");
    GrayImage out(w, h);
    const double r = 3.0 * s.width_sigma;
    const Point2 a = s.start();
    const Point2 b = s.end();
    const int u0 = std::max(0, int(std::floor(std::min(a.u, b.u) - r)));
    const int u1 = std::min(w - 1, int(std::ceil(std::max(a.u, b.u) + r)));
    const int v0 = std::max(0, int(std::floor(std::min(a.v, b.v) - r)));
    const int v1 = std::min(h - 1, int(std::ceil(std::max(a.v, b.v) + r)));
    for (int v = v0; v <= v1; ++v)
        for (int u = u0; u <= u1; ++u) out(u, v) = stripe_value(s, u, v);
    return out;
}

struct Star {
    Point2 position;
    double peak = 0.3;
    double psf_sigma = 1.0;
};

/// Short bright streak; kept at most kMaxCosmicRayLength long so it never
/// resembles a target stripe.
struct CosmicRay {
    Point2 center;
    double length = 6.0;
    double angle = 0.0;
    double peak = 0.7;
};

inline constexpr double kMaxCosmicRayLength = 15.0;
inline constexpr double kCosmicRaySigma = 0.5;

struct NoiseParams {
    double read_noise_sigma = 0.02;
    double shot_noise_gain = 0.001;  // shot variance = gain * signal
    double hot_pixel_rate = 0.0;
};

/// Parameters of the stray-light families. `sun_*` drive a smooth exponential
/// gradient; `moon_*` a compact bright disk with a wide halo; `earth_*` a very
/// large disk whose limb crosses the frame. `mixed` superposes all three.
struct StrayLightParams {
    double base_level = 0.08;
    double sun_amplitude = 0.2;
    double sun_direction = 0.0;  // radians, direction of increasing brightness
    double sun_steepness = 2.0;
    Point2 moon_center{0.0, 0.0};
    double moon_radius = 12.0;
    double moon_amplitude = 0.3;
    double moon_halo = 30.0;
    Point2 earth_center{0.0, 0.0};
    double earth_radius = 300.0;
    double earth_amplitude = 0.25;
    double earth_edge = 20.0;
};

struct SceneSpec {
    int width = 128;
    int height = 128;
    StripeParams stripe;
    StrayLight stray_light = StrayLight::sun;
    StrayLightParams stray;
    std::vector<Star> stars;
    std::vector<CosmicRay> cosmic_rays;
    NoiseParams noise;
    double target_snr = 5.0;
    std::uint64_t seed = 0;
};

struct BackgroundResult {
    GrayImage image;
    std::vector<std::string> warnings;
};

namespace detail {

inline double clamp_param(double x, double lo, double hi, const char* name, std::vector<std::string>& warnings) {
    if (std::isnan(x)) {
        warnings.push_back(std::string(name) + " was NaN, replaced by " + std::to_string(lo));
        return lo;
    }
    if (x < lo || x > hi) {
        const double c = std::clamp(x, lo, hi);
        warnings.push_back(std::string(name) + " clamped from " + std::to_string(x) + " to " + std::to_string(c));
        return c;
    }
    return x;
}

inline double sun_field(const StrayLightParams& p, int w, int h, int u, int v) {
    const double cx = 0.5 * (w - 1);
    const double cy = 0.5 * (h - 1);
    const double half_diag = 0.5 * std::hypot(double(w), double(h));
    const double x = ((u - cx) * std::cos(p.sun_direction) + (v - cy) * std::sin(p.sun_direction)) / half_diag;
    return p.sun_amplitude * std::exp(p.sun_steepness * (x - 1.0));
}

inline double moon_field(const StrayLightParams& p, int u, int v) {
    const double d = std::hypot(u - p.moon_center.u, v - p.moon_center.v);
    if (d <= p.moon_radius) return p.moon_amplitude;
    const double e = (d - p.moon_radius) / p.moon_halo;
    return p.moon_amplitude * std::exp(-0.5 * e * e);
}

inline double earth_field(const StrayLightParams& p, int u, int v) {
    const double d = std::hypot(u - p.earth_center.u, v - p.earth_center.v);
    return p.earth_amplitude * sigmoid((p.earth_radius - d) / p.earth_edge);
}

inline void add_gaussian_spot(GrayImage& img, Point2 c, double peak, double sigma) {
    const int r = int(std::ceil(4.0 * sigma));
    const int u0 = std::max(0, int(std::floor(c.u)) - r);
    const int u1 = std::min(img.width() - 1, int(std::ceil(c.u)) + r);
    const int v0 = std::max(0, int(std::floor(c.v)) - r);
    const int v1 = std::min(img.height() - 1, int(std::ceil(c.v)) + r);
    for (int v = v0; v <= v1; ++v)
        for (int u = u0; u <= u1; ++u) {
            const double d2 = (u - c.u) * (u - c.u) + (v - c.v) * (v - c.v);
            img(u, v) += peak * std::exp(-d2 / (2.0 * sigma * sigma));
        }
}

inline void add_cosmic_ray(GrayImage& img, const CosmicRay& ray) {
    StripeParams s;
    s.center = ray.center;
    s.length = ray.length;
    s.angle = ray.angle;
    s.peak = ray.peak;
    s.width_sigma = kCosmicRaySigma;
    const int r = int(std::ceil(0.5 * ray.length + 3.0 * kCosmicRaySigma)) + 1;
    const int cu = int(std::lround(ray.center.u));
    const int cv = int(std::lround(ray.center.v));
    for (int v = std::max(0, cv - r); v <= std::min(img.height() - 1, cv + r); ++v)
        for (int u = std::max(0, cu - r); u <= std::min(img.width() - 1, cu + r); ++u)
            img(u, v) += stripe_value(s, u, v);
}

}  // namespace detail

/// Stray-light field, stars and cosmic rays (no target, no noise).
/// Out-of-range parameters are clamped and reported in `warnings`.
inline BackgroundResult render_background(const SceneSpec& spec) {
    BackgroundResult out{GrayImage(spec.width, spec.height), {}};
    auto& warn = out.warnings;
    StrayLightParams p = spec.stray;
    p.base_level = detail::clamp_param(p.base_level, 0.0, 0.5, "base_level", warn);
    p.sun_amplitude = detail::clamp_param(p.sun_amplitude, 0.0, 0.8, "sun_amplitude", warn);
    p.sun_steepness = detail::clamp_param(p.sun_steepness, 0.0, 10.0, "sun_steepness", warn);
    p.moon_radius = detail::clamp_param(p.moon_radius, 0.0, 1e4, "moon_radius", warn);
    p.moon_amplitude = detail::clamp_param(p.moon_amplitude, 0.0, 0.8, "moon_amplitude", warn);
    p.moon_halo = detail::clamp_param(p.moon_halo, 1.0, 1e4, "moon_halo", warn);
    p.earth_radius = detail::clamp_param(p.earth_radius, 1.0, 1e5, "earth_radius", warn);
    p.earth_amplitude = detail::clamp_param(p.earth_amplitude, 0.0, 0.8, "earth_amplitude", warn);
    p.earth_edge = detail::clamp_param(p.earth_edge, 0.5, 1e4, "earth_edge", warn);

    const bool sun = spec.stray_light == StrayLight::sun || spec.stray_light == StrayLight::mixed;
    const bool moon = spec.stray_light == StrayLight::moon || spec.stray_light == StrayLight::mixed;
    const bool earth = spec.stray_light == StrayLight::earth || spec.stray_light == StrayLight::mixed;
    for (int v = 0; v < spec.height; ++v)
        for (int u = 0; u < spec.width; ++u) {
            double x = p.base_level;
            if (sun) x += detail::sun_field(p, spec.width, spec.height, u, v);
            if (moon) x += detail::moon_field(p, u, v);
            if (earth) x += detail::earth_field(p, u, v);
            out.image(u, v) = x;
        }

    for (const Star& s : spec.stars) {
        const double peak = detail::clamp_param(s.peak, 0.0, 1.0, "star.peak", warn);
        const double sigma = detail::clamp_param(s.psf_sigma, 0.3, 10.0, "star.psf_sigma", warn);
        detail::add_gaussian_spot(out.image, s.position, peak, sigma);
    }
    for (CosmicRay ray : spec.cosmic_rays) {
        ray.length = detail::clamp_param(ray.length, 0.0, kMaxCosmicRayLength, "cosmic_ray.length", warn);
        ray.peak = detail::clamp_param(ray.peak, 0.0, 1.0, "cosmic_ray.peak", warn);
        detail::add_cosmic_ray(out.image, ray);
    }
    return out;
}

struct SnrResult {
    double value = 0.0;
    bool infinite = false;  // background annulus had zero spread
};

inline constexpr int kAnnulusInner = 5;
inline constexpr int kAnnulusOuter = 15;

/// Pixels whose Euclidean distance to the nearest mask pixel lies in
/// [inner, outer].
inline std::vector<std::size_t> background_annulus(const BinaryMask& mask, int inner = kAnnulusInner,
                                                   int outer = kAnnulusOuter) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<int> best(mask.size(), std::numeric_limits<int>::max());
    const int o2 = outer * outer;
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            if (!mask(u, v)) continue;
            for (int dv = -outer; dv <= outer; ++dv)
                for (int du = -outer; du <= outer; ++du) {
                    const int d2 = du * du + dv * dv;
                    if (d2 > o2 || !mask.contains(u + du, v + dv)) continue;
                    int& b = best[mask.index(u + du, v + dv)];
                    b = std::min(b, d2);
                }
        }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (best[i] >= inner * inner && best[i] <= o2) out.push_back(i);
    return out;
}

inline SnrResult snr_over(const GrayImage& img, const std::vector<std::size_t>& target,
                          const std::vector<std::size_t>& annulus) {
    if (target.empty()) throw std::invalid_argument("compute_snr: mask has no positive pixel");
    if (annulus.empty()) throw std::invalid_argument("compute_snr: background annulus is empty");
    double mt = 0.0;
    for (auto i : target) mt += img[i];
    mt /= double(target.size());
    double mb = 0.0;
    for (auto i : annulus) mb += img[i];
    mb /= double(annulus.size());
    double var = 0.0;
    for (auto i : annulus) var += (img[i] - mb) * (img[i] - mb);
    const double sb = std::sqrt(var / double(annulus.size()));
    // a constant annulus leaves only rounding noise in the spread
    if (sb <= 1e-12 * std::max(1.0, std::abs(mb)))
        return {mt > mb ? std::numeric_limits<double>::infinity() : 0.0, true};
    return {(mt - mb) / sb, false};
}

/// (mean over mask - mean over annulus) / std over annulus, annulus taken at
/// 5..15 px from the mask.
inline SnrResult compute_snr(const GrayImage& img, const BinaryMask& mask) {
    require_same_shape(img, mask, "compute_snr");
    std::vector<std::size_t> target;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) target.push_back(i);
    return snr_over(img, target, background_annulus(mask));
}

struct BBox {
    int u_min = 0;
    int v_min = 0;
    int u_max = -1;
    int v_max = -1;
    friend bool operator==(const BBox&, const BBox&) = default;
};

inline BBox tight_bbox(const BinaryMask& mask) {
    BBox b{mask.width(), mask.height(), -1, -1};
    for (int v = 0; v < mask.height(); ++v)
        for (int u = 0; u < mask.width(); ++u)
            if (mask(u, v)) {
                b.u_min = std::min(b.u_min, u);
                b.v_min = std::min(b.v_min, v);
                b.u_max = std::max(b.u_max, u);
                b.v_max = std::max(b.v_max, v);
            }
    return b;
}

struct LabelSet {
    Pixel point;
    BinaryMask mask;
    BBox bbox;
};

inline bool is_coherent(const LabelSet& l, int min_area = 1) {
    return l.mask.contains(l.point.u, l.point.v) && l.mask(l.point.u, l.point.v) && tight_bbox(l.mask) == l.bbox &&
           geometry::connected_components(l.mask).size() == 1 && int(l.mask.count()) >= min_area;
}

/// Fraction of the unit-peak stripe layer that defines the ground-truth mask.
inline constexpr double kMaskThreshold = 0.5;

struct Frame {
    GrayImage image;
    LabelSet labels;
    double snr = 0.0;    // measured on the final image
    double peak = 0.0;   // stripe peak chosen by the SNR calibration
    std::vector<std::string> warnings;
};

class RescaleError : public std::runtime_error {
public:
    RescaleError(const std::string& what, double max_snr) : std::runtime_error(what), max_snr_(max_snr) {}
    double max_attainable_snr() const { return max_snr_; }

private:
    double max_snr_;
};

namespace detail {

struct Composer {
    const SceneSpec& spec;
    GrayImage background;
    GrayImage unit_stripe;
    std::vector<double> z;
    std::vector<double> hot;  // > 0 marks a hot pixel with that value

    double pixel(std::size_t i, double peak) const {
        if (hot[i] > 0.0) return hot[i];
        const double signal = background[i] + peak * unit_stripe[i];
        const double var = spec.noise.read_noise_sigma * spec.noise.read_noise_sigma +
                           spec.noise.shot_noise_gain * std::max(signal, 0.0);
        return clamp01(signal + z[i] * std::sqrt(var));
    }

    GrayImage image(double peak) const {
        GrayImage out(background.width(), background.height());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixel(i, peak);
        return out;
    }
};

}  // namespace detail

/// Renders background + target + noise, calibrating the target peak so the
/// measured SNR hits spec.target_snr, and derives the three label formats.
/// Throws RescaleError when the target SNR is out of reach without clipping.
inline Frame compose_and_label(const SceneSpec& spec) {
    if (!(spec.target_snr > 0.0)) throw std::invalid_argument("compose_and_label: target_snr must be > 0");
    StripeParams unit = spec.stripe;
    unit.peak = 1.0;
    BackgroundResult bg = render_background(spec);
    detail::Composer comp{spec, std::move(bg.image), render_stripe(unit, spec.width, spec.height), {}, {}};

    Rng rng(derive_seed(spec.seed, {0x6e6f697365}));  // "noise"
    comp.z.resize(comp.background.size());
    comp.hot.assign(comp.background.size(), 0.0);
    for (std::size_t i = 0; i < comp.z.size(); ++i) comp.z[i] = standard_normal(rng);
    if (spec.noise.hot_pixel_rate > 0.0) {
        for (std::size_t i = 0; i < comp.hot.size(); ++i)
            if (uniform(rng, 0.0, 1.0) < spec.noise.hot_pixel_rate) comp.hot[i] = uniform(rng, 0.6, 1.0);
    }

    Frame frame;
    frame.warnings = std::move(bg.warnings);
    frame.labels.mask = binarize(comp.unit_stripe, kMaskThreshold);
    if (!frame.labels.mask.any()) throw std::invalid_argument("compose_and_label: stripe produced an empty mask");
    std::vector<std::size_t> target;
    for (std::size_t i = 0; i < frame.labels.mask.size(); ++i)
        if (frame.labels.mask[i]) target.push_back(i);
    const std::vector<std::size_t> annulus = background_annulus(frame.labels.mask);

    // SNR only depends on mask and annulus pixels, so the search re-renders those alone.
    GrayImage scratch(spec.width, spec.height);
    auto snr_at = [&](double peak) {
        for (auto i : target) scratch[i] = comp.pixel(i, peak);
        for (auto i : annulus) scratch[i] = comp.pixel(i, peak);
        return snr_over(scratch, target, annulus).value;
    };

    double max_peak = 1.0;
    for (std::size_t i = 0; i < comp.unit_stripe.size(); ++i)
        if (comp.unit_stripe[i] > 0.0) max_peak = std::min(max_peak, (1.0 - comp.background[i]) / comp.unit_stripe[i]);
    if (max_peak <= 0.0) throw RescaleError("compose_and_label: background saturates the target region", 0.0);
    const double max_snr = snr_at(max_peak);
    if (max_snr < spec.target_snr)
        throw RescaleError("compose_and_label: target SNR " + std::to_string(spec.target_snr) +
                               " unattainable without clipping (max " + std::to_string(max_snr) + ")",
                           max_snr);

    double lo = 0.0;
    double hi = max_peak;
    for (int iter = 0; iter < 60; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double s = snr_at(mid);
        if (std::abs(s - spec.target_snr) <= 1e-4 * spec.target_snr) {
            lo = hi = mid;
            break;
        }
        (s < spec.target_snr ? lo : hi) = mid;
    }
    frame.peak = 0.5 * (lo + hi);
    frame.image = comp.image(frame.peak);
    frame.snr = snr_over(frame.image, target, annulus).value;
    frame.labels.point = geometry::mass_center(frame.labels.mask);
    frame.labels.bbox = tight_bbox(frame.labels.mask);
    return frame;
}

/// Ranges the scene sampler draws from. Every range is inclusive.
struct GeneratorConfig {
    int train_count = 1000;
    int val_count = 100;
    int test_count = 400;
    int width = 128;
    int height = 128;
    double snr_min = 1.0;
    double snr_max = 10.0;
    double length_min = 20.0;
    double length_max = 70.0;
    double width_sigma_min = 0.8;
    double width_sigma_max = 1.8;
    std::vector<StrayLight> families{kAllFamilies.begin(), kAllFamilies.end()};
    std::vector<Profile> profiles{Profile::uniform, Profile::linear_ramp, Profile::gaussian_bump};
    int max_stars = 12;
    int max_cosmic_rays = 3;
    double read_noise_min = 0.01;
    double read_noise_max = 0.03;
    double shot_noise_gain = 0.001;
    double hot_pixel_rate = 1e-4;
    double base_level_min = 0.04;
    double base_level_max = 0.12;
    double stray_amplitude_max = 0.35;
    std::uint64_t seed = 0;

    void validate() const {
        if (train_count < 0 || val_count < 0 || test_count < 0 || train_count + val_count + test_count <= 0)
            throw std::invalid_argument("generator config: split counts must be >= 0 with a positive total");
        if (width < 32 || height < 32) throw std::invalid_argument("generator config: frame must be at least 32x32");
        if (!(snr_min > 0.0 && snr_min <= snr_max)) throw std::invalid_argument("generator config: bad SNR range");
        if (!(length_min > kMaxCosmicRayLength && length_min <= length_max))
            throw std::invalid_argument("generator config: stripe lengths must exceed the cosmic-ray length");
        if (!(width_sigma_min > 0.0 && width_sigma_min <= width_sigma_max))
            throw std::invalid_argument("generator config: bad width_sigma range");
        if (families.empty() || profiles.empty())
            throw std::invalid_argument("generator config: families and profiles must be non-empty");
        if (max_stars < 0 || max_cosmic_rays < 0) throw std::invalid_argument("generator config: negative counts");
    }
};

/// Target parameters drawn once per frame and kept across placement retries,
/// so retries never bias the angle/length/SNR distributions.
struct TargetDraw {
    double angle = 0.0;
    double length = 0.0;
    double width_sigma = 1.0;
    double snr = 1.0;
    Profile profile = Profile::uniform;
};

inline TargetDraw draw_target(const GeneratorConfig& cfg, std::uint64_t frame_seed) {
    Rng rng(derive_seed(frame_seed, {0x746172676574}));  // "target"
    TargetDraw t;
    t.angle = uniform(rng, 0.0, std::numbers::pi);
    t.length = uniform(rng, cfg.length_min, cfg.length_max);
    t.width_sigma = uniform(rng, cfg.width_sigma_min, cfg.width_sigma_max);
    t.snr = uniform(rng, cfg.snr_min, cfg.snr_max);
    t.profile = cfg.profiles[std::size_t(uniform_int(rng, 0, int(cfg.profiles.size()) - 1))];
    return t;
}

/// Attempt from which a stripe whose mask keeps fragmenting is rendered with
/// the uniform profile. Thin ramps and bumps can dip below the mask threshold
/// mid-stripe; a uniform stripe always thresholds to one region.
inline constexpr int kUniformProfileAttempt = 20;

/// Full scene for one frame. `attempt` re-rolls placement, background and
/// distractors; later attempts progressively dim the stray light.
inline SceneSpec sample_scene(const GeneratorConfig& cfg, std::uint64_t frame_seed, StrayLight family, int attempt = 0) {
    const TargetDraw t = draw_target(cfg, frame_seed);
    Rng rng(derive_seed(frame_seed, {0x7363656e65, std::uint64_t(attempt)}));  // "scene"
    SceneSpec s;
    s.width = cfg.width;
    s.height = cfg.height;
    s.seed = derive_seed(frame_seed, {std::uint64_t(attempt)});
    s.target_snr = t.snr;
    s.stray_light = family;

    s.stripe.angle = t.angle;
    s.stripe.length = std::min(t.length, 0.8 * std::min(cfg.width, cfg.height));
    s.stripe.width_sigma = t.width_sigma;
    s.stripe.profile = attempt >= kUniformProfileAttempt ? Profile::uniform : t.profile;
    s.stripe.peak = 0.5;
    const double margin = 3.0 * t.width_sigma + 2.0;
    const double hu = 0.5 * s.stripe.length * std::abs(std::cos(t.angle)) + margin;
    const double hv = 0.5 * s.stripe.length * std::abs(std::sin(t.angle)) + margin;
    s.stripe.center = {uniform(rng, hu, cfg.width - 1 - hu), uniform(rng, hv, cfg.height - 1 - hv)};

    const double dim = attempt >= 8 ? std::pow(0.6, attempt - 7) : 1.0;
    const double amp = cfg.stray_amplitude_max * dim;
    const double diag = std::hypot(double(cfg.width), double(cfg.height));
    StrayLightParams& p = s.stray;
    p.base_level = uniform(rng, cfg.base_level_min, cfg.base_level_max);
    p.sun_amplitude = uniform(rng, 0.3, 1.0) * amp;
    p.sun_direction = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    p.sun_steepness = uniform(rng, 0.5, 3.0);
    const double moon_dir = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double moon_dist = uniform(rng, 0.35, 0.8) * diag;
    p.moon_center = {0.5 * cfg.width + moon_dist * std::cos(moon_dir), 0.5 * cfg.height + moon_dist * std::sin(moon_dir)};
    p.moon_radius = uniform(rng, 0.05, 0.2) * diag;
    p.moon_amplitude = uniform(rng, 0.3, 1.0) * amp;
    p.moon_halo = uniform(rng, 0.1, 0.4) * diag;
    const double earth_dir = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    p.earth_radius = uniform(rng, 2.0, 4.0) * diag;
    const double earth_dist = p.earth_radius + uniform(rng, 0.2, 0.6) * diag;
    p.earth_center = {0.5 * cfg.width + earth_dist * std::cos(earth_dir),
                      0.5 * cfg.height + earth_dist * std::sin(earth_dir)};
    p.earth_amplitude = uniform(rng, 0.3, 1.0) * amp;
    p.earth_edge = uniform(rng, 0.05, 0.2) * diag;
    if (family == StrayLight::mixed) {
        p.sun_amplitude *= 0.5;
        p.moon_amplitude *= 0.5;
        p.earth_amplitude *= 0.5;
    }

    const int n_stars = uniform_int(rng, 0, cfg.max_stars);
    for (int i = 0; i < n_stars; ++i)
        s.stars.push_back({{uniform(rng, 0.0, cfg.width - 1.0), uniform(rng, 0.0, cfg.height - 1.0)},
                           uniform(rng, 0.05, 0.5),
                           uniform(rng, 0.7, 1.5)});
    const int n_rays = uniform_int(rng, 0, cfg.max_cosmic_rays);
    for (int i = 0; i < n_rays; ++i)
        s.cosmic_rays.push_back({{uniform(rng, 0.0, cfg.width - 1.0), uniform(rng, 0.0, cfg.height - 1.0)},
                                 uniform(rng, 3.0, kMaxCosmicRayLength),
                                 uniform(rng, 0.0, std::numbers::pi),
                                 uniform(rng, 0.3, 0.9)});

    s.noise.read_noise_sigma = uniform(rng, cfg.read_noise_min, cfg.read_noise_max);
    s.noise.shot_noise_gain = cfg.shot_noise_gain;
    s.noise.hot_pixel_rate = cfg.hot_pixel_rate;
    return s;
}

struct GeneratedFrame {
    SceneSpec spec;
    Frame frame;
    int attempts = 1;
};

inline constexpr int kMaxSceneAttempts = 40;

/// Samples and composes one frame, re-rolling the scene until the SNR
/// calibration succeeds and the mask is one clean region.
inline GeneratedFrame generate_frame(const GeneratorConfig& cfg, std::uint64_t frame_seed, StrayLight family) {
    for (int attempt = 0; attempt < kMaxSceneAttempts; ++attempt) {
        SceneSpec spec = sample_scene(cfg, frame_seed, family, attempt);
        try {
            Frame f = compose_and_label(spec);
            if (!is_coherent(f.labels)) continue;
            spec.stripe.peak = f.peak;
            return {std::move(spec), std::move(f), attempt + 1};
        } catch (const RescaleError&) {
        }
    }
    throw std::runtime_error("generate_frame: no valid scene after " + std::to_string(kMaxSceneAttempts) + " attempts");
}

}  // namespace stripekit::synth
