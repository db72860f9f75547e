#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stripekit {

/// Integer pixel coordinate: u is the column, v the row.
struct Pixel {
    int u = 0;
    int v = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct Point2 {
    double u = 0.0;
    double v = 0.0;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Single-channel raster, row-major. Synthesized frames keep values in [0,1];
/// intermediate maps (filter responses, gradients) may leave that range.
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, double fill = 0.0)
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(checked_area(width, height)), fill) {}
    GrayImage(int width, int height, std::vector<double> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (data_.size() != static_cast<std::size_t>(checked_area(width, height)))
            throw ShapeError("GrayImage: data length does not match width*height");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int u, int v) { return data_[index(u, v)]; }
    double operator()(int u, int v) const { return data_[index(u, v)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width_ && v < height_; }
    std::size_t index(int u, int v) const {
        return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(u);
    }

    std::span<double> pixels() { return data_; }
    std::span<const double> pixels() const { return data_; }
    const std::vector<double>& data() const { return data_; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    static long checked_area(int w, int h) {
        if (w < 0 || h < 0) throw ShapeError("GrayImage: negative dimension");
        return static_cast<long>(w) * static_cast<long>(h);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false)
        : width_(width), height_(height), bits_(checked_area(width, height), fill ? 1 : 0) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return bits_.size(); }

    bool operator()(int u, int v) const { return bits_[index(u, v)] != 0; }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    void set(int u, int v, bool on = true) { bits_[index(u, v)] = on ? 1 : 0; }
    void set(std::size_t i, bool on = true) { bits_[i] = on ? 1 : 0; }

    bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width_ && v < height_; }
    std::size_t index(int u, int v) const {
        return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(u);
    }

    std::size_t count() const {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }
    bool any() const { return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) != bits_.end(); }

    const std::vector<std::uint8_t>& bits() const { return bits_; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    static std::size_t checked_area(int w, int h) {
        if (w < 0 || h < 0) throw ShapeError("BinaryMask: negative dimension");
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

template <class A, class B>
bool same_shape(const A& a, const B& b) {
    return a.width() == b.width() && a.height() == b.height();
}

template <class A, class B>
void require_same_shape(const A& a, const B& b, const char* what) {
    if (!same_shape(a, b))
        throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                         std::to_string(b.height()) + ")");
}

/// Pixels strictly above `threshold` become positive.
inline BinaryMask binarize(const GrayImage& img, double threshold) {
    BinaryMask out(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i)
        if (img[i] > threshold) out.set(i);
    return out;
}

inline GrayImage to_image(const BinaryMask& mask, double on = 1.0, double off = 0.0) {
    GrayImage out(mask.width(), mask.height(), off);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out[i] = on;
    return out;
}

inline std::vector<Pixel> positive_pixels(const BinaryMask& mask) {
    std::vector<Pixel> out;
    for (int v = 0; v < mask.height(); ++v)
        for (int u = 0; u < mask.width(); ++u)
            if (mask(u, v)) out.push_back({u, v});
    return out;
}

inline bool all_finite(const GrayImage& img) {
    return std::all_of(img.data().begin(), img.data().end(), [](double x) { return std::isfinite(x); });
}

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace stripekit
