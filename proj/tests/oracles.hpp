#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. Nothing here calls into the library code it is compared against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "stripekit/image.hpp"

namespace oracle {

using stripekit::BinaryMask;
using stripekit::GrayImage;
using stripekit::Pixel;

/// Breadth-first 8-neighbour flood fill. Each region is the sorted list of
/// its flat pixel indices; regions are sorted lexicographically.
inline std::vector<std::vector<std::size_t>> flood_fill(const BinaryMask& m) {
    const int w = m.width();
    const int h = m.height();
    std::vector<char> seen(m.size(), 0);
    std::vector<std::vector<std::size_t>> out;
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            const std::size_t start = std::size_t(v) * std::size_t(w) + std::size_t(u);
            if (!m[start] || seen[start]) continue;
            std::vector<std::size_t> region;
            std::deque<std::pair<int, int>> q{{u, v}};
            seen[start] = 1;
            while (!q.empty()) {
                auto [x, y] = q.front();
                q.pop_front();
                region.push_back(std::size_t(y) * std::size_t(w) + std::size_t(x));
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx;
                        const int ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const std::size_t j = std::size_t(ny) * std::size_t(w) + std::size_t(nx);
                        if (m[j] && !seen[j]) {
                            seen[j] = 1;
                            q.push_back({nx, ny});
                        }
                    }
            }
            std::sort(region.begin(), region.end());
            out.push_back(std::move(region));
        }
    std::sort(out.begin(), out.end());
    return out;
}

/// Squared diameter of a point set by checking every pair.
inline long diameter_sq(const std::vector<Pixel>& pts) {
    long best = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const long du = pts[i].u - pts[j].u;
            const long dv = pts[i].v - pts[j].v;
            best = std::max(best, du * du + dv * dv);
        }
    return best;
}

/// Random 8-connected blob grown by a random walk, at most `max_area` pixels.
inline std::vector<Pixel> random_region(std::mt19937_64& rng, int max_area, int extent = 64) {
    std::uniform_int_distribution<int> area_d(1, max_area);
    std::uniform_int_distribution<int> step(-1, 1);
    const int target = area_d(rng);
    std::vector<char> taken(std::size_t(extent) * std::size_t(extent), 0);
    std::vector<Pixel> pts;
    Pixel p{extent / 2, extent / 2};
    for (int guard = 0; int(pts.size()) < target && guard < target * 50; ++guard) {
        const std::size_t i = std::size_t(p.v) * std::size_t(extent) + std::size_t(p.u);
        if (!taken[i]) {
            taken[i] = 1;
            pts.push_back(p);
        }
        Pixel n{std::clamp(p.u + step(rng), 0, extent - 1), std::clamp(p.v + step(rng), 0, extent - 1)};
        p = n;
    }
    return pts;
}

inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
    std::bernoulli_distribution on(density);
    BinaryMask m(w, h);
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, on(rng));
    return m;
}

/// Central difference of a scalar function of one pixel of `x`.
inline double central_difference(const std::function<double(const GrayImage&)>& f, const GrayImage& x,
                                 std::size_t i, double h) {
    GrayImage hi = x;
    GrayImage lo = x;
    hi[i] += h;
    lo[i] -= h;
    return (f(hi) - f(lo)) / (2.0 * h);
}

struct GradientCase {
    GrayImage pred;
    BinaryMask label;
};

/// Probability map with a noisy oblique bright bar and a label bar at a
/// slightly different angle; values stay inside (0.02, 0.98).
inline GradientCase gradient_case(std::uint64_t seed, int w = 48, int h = 48) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double a_pred = unit(rng) * std::numbers::pi;
    const double a_label = a_pred + (unit(rng) - 0.5) * 0.8;
    const double cu = w / 2.0 + (unit(rng) - 0.5) * 6.0;
    const double cv = h / 2.0 + (unit(rng) - 0.5) * 6.0;
    GradientCase c{GrayImage(w, h), BinaryMask(w, h)};
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            const double x = u - cu;
            const double y = v - cv;
            const double dp = std::abs(-x * std::sin(a_pred) + y * std::cos(a_pred));
            const double lp = std::abs(x * std::cos(a_pred) + y * std::sin(a_pred));
            const double base = (dp < 2.5 && lp < 16.0) ? 0.75 : 0.15;
            c.pred(u, v) = std::clamp(base + (unit(rng) - 0.5) * 0.3, 0.02, 0.98);
            const double dl = std::abs(-x * std::sin(a_label) + y * std::cos(a_label));
            const double ll = std::abs(x * std::cos(a_label) + y * std::sin(a_label));
            if (dl < 1.8 && ll < 14.0) c.label.set(u, v);
        }
    return c;
}

/// Largest relative error between `grad` and central differences of `f` at
/// `samples` random pixels whose values sit at least `margin` away from
/// every point in `kinks`. Pairs that are both below `floor` count as equal.
inline double max_gradient_error(const std::function<double(const GrayImage&)>& f, const GrayImage& grad,
                                 const GrayImage& x, int samples, std::uint64_t seed, double h,
                                 const std::vector<double>& kinks, double margin, double floor = 1e-12) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    double worst = 0.0;
    for (int n = 0, tries = 0; n < samples && tries < samples * 100; ++tries) {
        const std::size_t i = pick(rng);
        bool near = false;
        for (double k : kinks) near = near || std::abs(x[i] - k) < margin;
        if (near) continue;
        const double num = central_difference(f, x, i, h);
        const double ana = grad[i];
        const double scale = std::max(std::abs(num), std::abs(ana));
        if (scale > floor) worst = std::max(worst, std::abs(num - ana) / scale);
        ++n;
    }
    return worst;
}

/// Square-window median with replicated borders, full sort per pixel.
inline GrayImage median(const GrayImage& img, int r) {
    GrayImage out(img.width(), img.height());
    std::vector<double> win;
    for (int v = 0; v < img.height(); ++v)
        for (int u = 0; u < img.width(); ++u) {
            win.clear();
            for (int dv = -r; dv <= r; ++dv)
                for (int du = -r; du <= r; ++du)
                    win.push_back(img(std::clamp(u + du, 0, img.width() - 1), std::clamp(v + dv, 0, img.height() - 1)));
            std::sort(win.begin(), win.end());
            out(u, v) = win[win.size() / 2];
        }
    return out;
}

/// Correlation with a (2r+1)^2 row-major tap list, zero padding.
inline GrayImage correlate(const GrayImage& img, int r, const std::vector<double>& taps) {
    GrayImage out(img.width(), img.height());
    const int side = 2 * r + 1;
    for (int v = 0; v < img.height(); ++v)
        for (int u = 0; u < img.width(); ++u) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    if (!img.contains(u + dx, v + dy)) continue;
                    acc += taps[std::size_t((dy + r) * side + dx + r)] * img(u + dx, v + dy);
                }
            out(u, v) = acc;
        }
    return out;
}

/// Maximum of a uniform-profile Gaussian stripe of the given peak, sampled on
/// a grid `factor` times finer than the pixel grid over the whole frame.
inline double supersampled_max(double cu, double cv, double length, double angle, double sigma, double peak,
                               int w, int h, int factor) {
    const double du = std::cos(angle);
    const double dv = std::sin(angle);
    const double au = cu - 0.5 * length * du;
    const double av = cv - 0.5 * length * dv;
    double best = 0.0;
    for (int y = 0; y < h * factor; ++y)
        for (int x = 0; x < w * factor; ++x) {
            const double px = double(x) / factor;
            const double py = double(y) / factor;
            const double t = std::clamp((px - au) * du + (py - av) * dv, 0.0, length);
            const double ex = px - (au + t * du);
            const double ey = py - (av + t * dv);
            best = std::max(best, peak * std::exp(-(ex * ex + ey * ey) / (2.0 * sigma * sigma)));
        }
    return best;
}

/// (target mean - annulus mean) / annulus std, the annulus found by scanning
/// every pixel's distance to every mask pixel.
inline double snr(const GrayImage& img, const BinaryMask& mask, int inner = 5, int outer = 15) {
    std::vector<Pixel> on;
    for (int v = 0; v < mask.height(); ++v)
        for (int u = 0; u < mask.width(); ++u)
            if (mask(u, v)) on.push_back({u, v});
    double mt = 0.0;
    for (const auto& p : on) mt += img(p.u, p.v);
    mt /= double(on.size());
    std::vector<double> bg;
    for (int v = 0; v < mask.height(); ++v)
        for (int u = 0; u < mask.width(); ++u) {
            long d2 = std::numeric_limits<long>::max();
            for (const auto& p : on) d2 = std::min(d2, long(p.u - u) * (p.u - u) + long(p.v - v) * (p.v - v));
            if (d2 >= long(inner) * inner && d2 <= long(outer) * outer) bg.push_back(img(u, v));
        }
    double mb = 0.0;
    for (double x : bg) mb += x;
    mb /= double(bg.size());
    double var = 0.0;
    for (double x : bg) var += (x - mb) * (x - mb);
    return (mt - mb) / std::sqrt(var / double(bg.size()));
}

}  // namespace oracle
