#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "stripekit/image.hpp"

namespace stripekit::geometry {

/// Maximal 8-connected set of positive pixels. `pixels` is in scanline order.
struct ConnectedRegion {
    int id = 0;
    std::vector<Pixel> pixels;

    std::size_t area() const { return pixels.size(); }
};

/// Longest chord of a region. `angle` is the chord direction folded into [0, pi).
struct LineSegment {
    Pixel p1;
    Pixel p2;
    double angle = 0.0;
    bool degenerate = false;

    double length() const { return std::hypot(double(p2.u - p1.u), double(p2.v - p1.v)); }
};

inline constexpr int kDefaultMinArea = 5;
inline constexpr std::size_t kExhaustiveDiameterLimit = 512;

/// Labels every pixel with its region index (-1 for background) and returns
/// the regions ordered by descending area, ties broken by the scanline
/// position of their first pixel.
inline std::vector<ConnectedRegion> connected_components(const BinaryMask& mask,
                                                         std::vector<int>* labels_out = nullptr) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<int> label(mask.size(), -1);
    std::vector<ConnectedRegion> regions;
    std::vector<Pixel> stack;

    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            const std::size_t idx = mask.index(u, v);
            if (!mask[idx] || label[idx] >= 0) continue;
            const int id = static_cast<int>(regions.size());
            ConnectedRegion region;
            region.id = id;
            label[idx] = id;
            stack.assign(1, Pixel{u, v});
            while (!stack.empty()) {
                const Pixel p = stack.back();
                stack.pop_back();
                region.pixels.push_back(p);
                for (int dv = -1; dv <= 1; ++dv)
                    for (int du = -1; du <= 1; ++du) {
                        const int x = p.u + du;
                        const int y = p.v + dv;
                        if ((du == 0 && dv == 0) || !mask.contains(x, y)) continue;
                        const std::size_t j = mask.index(x, y);
                        if (mask[j] && label[j] < 0) {
                            label[j] = id;
                            stack.push_back({x, y});
                        }
                    }
            }
            std::sort(region.pixels.begin(), region.pixels.end(), [](const Pixel& a, const Pixel& b) {
                return a.v != b.v ? a.v < b.v : a.u < b.u;
            });
            regions.push_back(std::move(region));
        }
    }

    // regions were discovered in scanline order of their first pixel, so a
    // stable sort on area gives the documented ordering
    std::stable_sort(regions.begin(), regions.end(),
                     [](const ConnectedRegion& a, const ConnectedRegion& b) { return a.area() > b.area(); });
    std::vector<int> remap(regions.size());
    for (std::size_t i = 0; i < regions.size(); ++i) {
        remap[static_cast<std::size_t>(regions[i].id)] = static_cast<int>(i);
        regions[i].id = static_cast<int>(i);
    }
    if (labels_out) {
        for (int& l : label)
            if (l >= 0) l = remap[static_cast<std::size_t>(l)];
        *labels_out = std::move(label);
    }
    return regions;
}

inline std::size_t count_regions(const BinaryMask& mask, int min_area) {
    const auto regions = connected_components(mask);
    return static_cast<std::size_t>(std::count_if(regions.begin(), regions.end(), [&](const ConnectedRegion& r) {
        return r.area() >= static_cast<std::size_t>(std::max(min_area, 1));
    }));
}

/// Accepts a mask iff it holds exactly one connected region of at least
/// `min_area` pixels. Smaller specks do not count as objects.
inline bool connected_area_check(const BinaryMask& mask, int min_area = kDefaultMinArea) {
    return count_regions(mask, min_area) == 1;
}

/// Direction of the vector (du, dv) folded into [0, pi).
inline double fold_angle(double du, double dv) {
    double a = std::atan2(dv, du);
    if (a < 0.0) a += std::numbers::pi;
    if (a >= std::numbers::pi) a -= std::numbers::pi;
    return a;
}

/// Acute angle between two undirected line directions, in [0, pi/2].
inline double folded_difference(double a, double b) {
    const double d = std::abs(a - b);
    return std::min(d, std::numbers::pi - d);
}

namespace detail {

inline long sq_dist(const Pixel& a, const Pixel& b) {
    const long du = a.u - b.u;
    const long dv = a.v - b.v;
    return du * du + dv * dv;
}

inline LineSegment make_segment(const Pixel& a, const Pixel& b) {
    LineSegment s;
    s.p1 = a;
    s.p2 = b;
    s.degenerate = (a == b);
    s.angle = s.degenerate ? 0.0 : fold_angle(double(b.u - a.u), double(b.v - a.v));
    return s;
}

inline LineSegment exhaustive_pair(const std::vector<Pixel>& pts) {
    std::size_t bi = 0;
    std::size_t bj = 0;
    long best = -1;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const long d = sq_dist(pts[i], pts[j]);
            if (d > best) {
                best = d;
                bi = i;
                bj = j;
            }
        }
    return make_segment(pts[bi], pts[bj]);
}

inline long cross(const Pixel& o, const Pixel& a, const Pixel& b) {
    return long(a.u - o.u) * long(b.v - o.v) - long(a.v - o.v) * long(b.u - o.u);
}

/// Andrew's monotone chain; input need not be sorted.
inline std::vector<Pixel> convex_hull(std::vector<Pixel> pts) {
    std::sort(pts.begin(), pts.end(), [](const Pixel& a, const Pixel& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Pixel> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

inline std::size_t farthest_from(const std::vector<Pixel>& pts, const Pixel& from) {
    std::size_t best = 0;
    long best_d = -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const long d = sq_dist(pts[i], from);
        if (d > best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

inline std::size_t nearest_to(const std::vector<Pixel>& pts, const Pixel& to) {
    std::size_t best = 0;
    long best_d = std::numeric_limits<long>::max();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const long d = sq_dist(pts[i], to);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

}  // namespace detail

/// Endpoints of the region's longest chord.
///
/// Regions up to kExhaustiveDiameterLimit pixels are searched exhaustively.
/// Larger regions use farthest-point refinement on the convex hull: start at
/// the hull vertex farthest from the centroid, then bounce to the farthest
/// vertex until the chord stops growing.
inline LineSegment farthest_pair(const std::vector<Pixel>& pixels) {
    if (pixels.empty()) throw std::invalid_argument("farthest_pair: empty region");
    if (pixels.size() == 1) return detail::make_segment(pixels[0], pixels[0]);
    if (pixels.size() <= kExhaustiveDiameterLimit) return detail::exhaustive_pair(pixels);

    const std::vector<Pixel> hull = detail::convex_hull(pixels);
    if (hull.size() <= 64) return detail::exhaustive_pair(hull);
    double cu = 0.0;
    double cv = 0.0;
    for (const auto& p : pixels) {
        cu += p.u;
        cv += p.v;
    }
    const Pixel centroid{static_cast<int>(std::lround(cu / double(pixels.size()))),
                         static_cast<int>(std::lround(cv / double(pixels.size())))};
    std::size_t a = detail::farthest_from(hull, centroid);
    std::size_t b = detail::farthest_from(hull, hull[a]);
    long best = detail::sq_dist(hull[a], hull[b]);
    for (int iter = 0; iter < 32; ++iter) {
        const std::size_t c = detail::farthest_from(hull, hull[b]);
        const long d = detail::sq_dist(hull[b], hull[c]);
        if (d <= best) break;
        best = d;
        a = b;
        b = c;
    }
    return detail::make_segment(hull[a], hull[b]);
}

inline LineSegment farthest_pair(const ConnectedRegion& region) { return farthest_pair(region.pixels); }

/// Integer-rounded centroid of the positive pixels. When the rounded centroid
/// is not itself a positive pixel (concave shapes), the nearest positive pixel
/// is returned instead, ties resolved in scanline order.
inline Pixel mass_center(const BinaryMask& mask) {
    const auto pts = positive_pixels(mask);
    if (pts.empty()) throw std::invalid_argument("mass_center: empty mask");
    double su = 0.0;
    double sv = 0.0;
    for (const auto& p : pts) {
        su += p.u;
        sv += p.v;
    }
    const Pixel c{static_cast<int>(std::lround(su / double(pts.size()))),
                  static_cast<int>(std::lround(sv / double(pts.size())))};
    if (mask.contains(c.u, c.v) && mask(c.u, c.v)) return c;
    return pts[detail::nearest_to(pts, c)];
}

inline BinaryMask region_mask(const ConnectedRegion& region, int width, int height) {
    BinaryMask m(width, height);
    for (const auto& p : region.pixels) m.set(p.u, p.v);
    return m;
}

}  // namespace stripekit::geometry
