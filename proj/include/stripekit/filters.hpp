#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "stripekit/image.hpp"

namespace stripekit::filters {

inline int clamp_coord(int x, int n) { return std::clamp(x, 0, n - 1); }

/// Square-window median with replicated borders.
inline GrayImage median(const GrayImage& img, int radius) {
    if (radius <= 0) return img;
    const int w = img.width();
    const int h = img.height();
    GrayImage out(w, h);
    // sorted sliding window along each row: drop the leaving column, insert the entering one
    std::vector<double> window;
    window.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)));
    auto sample = [&](int u, int v) { return img(clamp_coord(u, w), clamp_coord(v, h)); };
    for (int v = 0; v < h; ++v) {
        window.clear();
        for (int dv = -radius; dv <= radius; ++dv)
            for (int du = -radius; du <= radius; ++du) window.push_back(sample(du, v + dv));
        std::sort(window.begin(), window.end());
        const auto mid = static_cast<std::size_t>(window.size() / 2);
        for (int u = 0;; ++u) {
            out(u, v) = window[mid];
            if (u + 1 == w) break;
            for (int dv = -radius; dv <= radius; ++dv) {
                const double leaving = sample(u - radius, v + dv);
                const double entering = sample(u + radius + 1, v + dv);
                // overwrite the leaving value and bubble the entering one into place
                auto pos = static_cast<std::size_t>(
                    std::lower_bound(window.begin(), window.end(), leaving) - window.begin());
                while (pos + 1 < window.size() && window[pos + 1] < entering) {
                    window[pos] = window[pos + 1];
                    ++pos;
                }
                while (pos > 0 && window[pos - 1] > entering) {
                    window[pos] = window[pos - 1];
                    --pos;
                }
                window[pos] = entering;
            }
        }
    }
    return out;
}

inline double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const auto mid = values.begin() + static_cast<long>(values.size() / 2);
    std::nth_element(values.begin(), mid, values.end());
    return *mid;
}

/// 1.4826 * median absolute deviation: a Gaussian-consistent noise estimate.
inline double robust_sigma(const GrayImage& img) {
    const double med = median_of(img.data());
    std::vector<double> dev;
    dev.reserve(img.size());
    for (double x : img.pixels()) dev.push_back(std::abs(x - med));
    return 1.4826 * median_of(std::move(dev));
}

struct LocalStats {
    GrayImage mean;
    GrayImage stddev;
};

/// Windowed mean and standard deviation via integral images; windows are
/// truncated at the border.
inline LocalStats local_stats(const GrayImage& img, int radius) {
    const int w = img.width();
    const int h = img.height();
    const auto stride = static_cast<std::size_t>(w + 1);
    std::vector<double> s1(stride * static_cast<std::size_t>(h + 1), 0.0);
    std::vector<double> s2(s1.size(), 0.0);
    auto at = [stride](int x, int y) { return static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x); };
    for (int y = 0; y < h; ++y) {
        double r1 = 0.0;
        double r2 = 0.0;
        for (int x = 0; x < w; ++x) {
            const double p = img(x, y);
            r1 += p;
            r2 += p * p;
            s1[at(x + 1, y + 1)] = s1[at(x + 1, y)] + r1;
            s2[at(x + 1, y + 1)] = s2[at(x + 1, y)] + r2;
        }
    }
    LocalStats out{GrayImage(w, h), GrayImage(w, h)};
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - radius);
        const int y1 = std::min(h - 1, y + radius);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - radius);
            const int x1 = std::min(w - 1, x + radius);
            const double n = static_cast<double>((x1 - x0 + 1) * (y1 - y0 + 1));
            const double a = s1[at(x1 + 1, y1 + 1)] - s1[at(x0, y1 + 1)] - s1[at(x1 + 1, y0)] + s1[at(x0, y0)];
            const double b = s2[at(x1 + 1, y1 + 1)] - s2[at(x0, y1 + 1)] - s2[at(x1 + 1, y0)] + s2[at(x0, y0)];
            const double m = a / n;
            out.mean(x, y) = m;
            out.stddev(x, y) = std::sqrt(std::max(0.0, b / n - m * m));
        }
    }
    return out;
}

namespace detail {
template <class Pick>
GrayImage rank_filter(const GrayImage& img, int radius, Pick pick) {
    // separable square structuring element
    GrayImage tmp(img.width(), img.height());
    GrayImage out(img.width(), img.height());
    for (int v = 0; v < img.height(); ++v)
        for (int u = 0; u < img.width(); ++u) {
            double acc = img(u, v);
            for (int d = -radius; d <= radius; ++d) acc = pick(acc, img(clamp_coord(u + d, img.width()), v));
            tmp(u, v) = acc;
        }
    for (int v = 0; v < img.height(); ++v)
        for (int u = 0; u < img.width(); ++u) {
            double acc = tmp(u, v);
            for (int d = -radius; d <= radius; ++d) acc = pick(acc, tmp(u, clamp_coord(v + d, img.height())));
            out(u, v) = acc;
        }
    return out;
}
}  // namespace detail

inline GrayImage erode(const GrayImage& img, int radius) {
    return detail::rank_filter(img, radius, [](double a, double b) { return std::min(a, b); });
}

inline GrayImage dilate(const GrayImage& img, int radius) {
    return detail::rank_filter(img, radius, [](double a, double b) { return std::max(a, b); });
}

/// img minus its morphological opening.
inline GrayImage white_tophat(const GrayImage& img, int radius) {
    const GrayImage opened = dilate(erode(img, radius), radius);
    GrayImage out(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] - opened[i];
    return out;
}

/// Square odd-sized kernel, correlation with zero padding outside the frame.
struct Kernel {
    int radius = 0;
    std::vector<double> taps;  // (2r+1)^2, row-major

    double at(int dx, int dy) const {
        const int side = 2 * radius + 1;
        return taps[static_cast<std::size_t>((dy + radius) * side + (dx + radius))];
    }
};

inline GrayImage correlate(const GrayImage& img, const Kernel& k) {
    GrayImage out(img.width(), img.height());
    const int r = k.radius;
    const int side = 2 * r + 1;
    // sparse tap list keeps the inner loop tight for mostly-zero line kernels
    struct Tap {
        int dx, dy;
        double w;
    };
    std::vector<Tap> taps;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const double w = k.taps[static_cast<std::size_t>((dy + r) * side + (dx + r))];
            if (w != 0.0) taps.push_back({dx, dy, w});
        }
    const int w = img.width();
    const int h = img.height();
    std::vector<long> offsets;
    for (const Tap& t : taps) offsets.push_back(long(t.dy) * w + t.dx);
    const double* src = img.data().data();
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            double acc = 0.0;
            if (u >= r && v >= r && u < w - r && v < h - r) {
                const double* base = src + long(v) * w + u;
                for (std::size_t j = 0; j < taps.size(); ++j) acc += taps[j].w * base[offsets[j]];
            } else {
                for (const Tap& t : taps) {
                    const int x = u + t.dx;
                    const int y = v + t.dy;
                    if (x >= 0 && y >= 0 && x < w && y < h) acc += t.w * img(x, y);
                }
            }
            out(u, v) = acc;
        }
    return out;
}

inline GrayImage subtract(const GrayImage& a, const GrayImage& b) {
    require_same_shape(a, b, "subtract");
    GrayImage out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

}  // namespace stripekit::filters
