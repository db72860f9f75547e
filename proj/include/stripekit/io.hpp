#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stripekit/image.hpp"

namespace stripekit::io {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public IoError {
public:
    using IoError::IoError;
};

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// PGM (P5). 16-bit files store big-endian samples.

inline std::uint16_t to_u16(double x) { return std::uint16_t(std::lround(clamp01(x) * 65535.0)); }
inline std::uint8_t to_u8(double x) { return std::uint8_t(std::lround(clamp01(x) * 255.0)); }

inline void write_pgm16(const fs::path& path, const GrayImage& img) {
    std::string buf = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n65535\n";
    buf.reserve(buf.size() + 2 * img.size());
    for (double x : img.pixels()) {
        const std::uint16_t q = to_u16(x);
        buf.push_back(char(q >> 8));
        buf.push_back(char(q & 0xff));
    }
    write_text(path, buf);
}

inline GrayImage read_pgm(const fs::path& path) {
    const std::string data = read_text(path);
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto token = [&] {
        skip_space();
        const std::size_t start = pos;
        while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        return data.substr(start, pos - start);
    };
    if (token() != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": malformed PGM header");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw FormatError(path.string() + ": bad PGM header");
    ++pos;  // single whitespace before raster
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    if (data.size() < pos + bytes * std::size_t(w) * std::size_t(h)) throw FormatError(path.string() + ": truncated PGM");
    GrayImage img(w, h);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const auto* p = reinterpret_cast<const unsigned char*>(data.data() + pos + bytes * i);
        const unsigned q = bytes == 2 ? (unsigned(p[0]) << 8 | p[1]) : p[0];
        img[i] = double(q) / double(maxval);
    }
    return img;
}

// ---------------------------------------------------------------------------
// PNG via libpng

namespace detail {

struct PngWriteGuard {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteGuard() { png_destroy_write_struct(&png, &info); }
};

struct PngReadGuard {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadGuard() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

inline void write_png_rows(const fs::path& path, int w, int h, int color_type, int channels,
                           const std::vector<std::uint8_t>& pixels) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
    if (!file) throw IoError("cannot write " + path.string());
    PngWriteGuard g;
    g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!g.png) throw IoError("png_create_write_struct failed");
    g.info = png_create_info_struct(g.png);
    if (!g.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(g.png))) throw IoError("libpng error while writing " + path.string());
    png_init_io(g.png, file.get());
    png_set_IHDR(g.png, g.info, png_uint_32(w), png_uint_32(h), 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(g.png, g.info);
    for (int y = 0; y < h; ++y)
        png_write_row(g.png, const_cast<png_bytep>(pixels.data() + std::size_t(y) * std::size_t(w) * std::size_t(channels)));
    png_write_end(g.png, nullptr);
}

}  // namespace detail

inline void write_png8(const fs::path& path, const GrayImage& img) {
    std::vector<std::uint8_t> px(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) px[i] = to_u8(img[i]);
    detail::write_png_rows(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, 1, px);
}

/// Masks are stored as 8-bit grayscale with values {0, 255}.
inline void write_mask_png(const fs::path& path, const BinaryMask& mask) {
    std::vector<std::uint8_t> px(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) px[i] = mask[i] ? 255 : 0;
    detail::write_png_rows(path, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 1, px);
}

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // interleaved

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), rgb(std::size_t(w) * std::size_t(h) * 3, 0) {}
    std::array<std::uint8_t, 3> get(std::size_t i) const { return {rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]}; }
    void put(std::size_t i, std::array<std::uint8_t, 3> c) {
        rgb[3 * i] = c[0];
        rgb[3 * i + 1] = c[1];
        rgb[3 * i + 2] = c[2];
    }
};

inline void write_rgb_png(const fs::path& path, const RgbImage& img) {
    detail::write_png_rows(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 3, img.rgb);
}

struct PngData {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

/// Decodes any PNG into 8-bit samples (gray, gray+alpha, RGB or RGBA).
inline PngData read_png(const fs::path& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> file(std::fopen(path.c_str(), "rb"));
    if (!file) throw IoError("cannot open " + path.string());
    std::array<unsigned char, 8> sig{};
    if (std::fread(sig.data(), 1, sig.size(), file.get()) != sig.size() || png_sig_cmp(sig.data(), 0, sig.size()))
        throw FormatError(path.string() + ": not a PNG file");
    detail::PngReadGuard g;
    g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!g.png) throw IoError("png_create_read_struct failed");
    g.info = png_create_info_struct(g.png);
    if (!g.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(g.png))) throw FormatError("libpng error while reading " + path.string());
    png_init_io(g.png, file.get());
    png_set_sig_bytes(g.png, int(sig.size()));
    png_read_info(g.png, g.info);
    const int bit_depth = png_get_bit_depth(g.png, g.info);
    const int color = png_get_color_type(g.png, g.info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(g.png);
    if (bit_depth == 16) png_set_strip_16(g.png);
    png_read_update_info(g.png, g.info);
    PngData out;
    out.width = int(png_get_image_width(g.png, g.info));
    out.height = int(png_get_image_height(g.png, g.info));
    out.channels = png_get_channels(g.png, g.info);
    const std::size_t rowbytes = png_get_rowbytes(g.png, g.info);
    out.pixels.resize(rowbytes * std::size_t(out.height));
    std::vector<png_bytep> rows(std::size_t(out.height));
    for (int y = 0; y < out.height; ++y) rows[std::size_t(y)] = out.pixels.data() + std::size_t(y) * rowbytes;
    png_read_image(g.png, rows.data());
    png_read_end(g.png, nullptr);
    return out;
}

/// Reads a mask PNG: any nonzero value of the first channel is foreground.
inline BinaryMask read_mask_png(const fs::path& path) {
    const PngData d = read_png(path);
    BinaryMask m(d.width, d.height);
    for (std::size_t i = 0; i < m.size(); ++i)
        if (d.pixels[i * std::size_t(d.channels)] != 0) m.set(i);
    return m;
}

inline GrayImage read_gray_png(const fs::path& path) {
    const PngData d = read_png(path);
    GrayImage img(d.width, d.height);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = d.pixels[i * std::size_t(d.channels)] / 255.0;
    return img;
}

/// Loads a PGM or PNG by extension.
inline GrayImage read_image(const fs::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".png") return read_gray_png(path);
    throw FormatError(path.string() + ": unsupported image extension");
}

// ---------------------------------------------------------------------------
// TOML-style key/value config: `key = value` lines, `[section]` headers that
// prefix later keys with "section.", `#` comments, optional quotes on strings.

class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>") {
        KeyValueConfig cfg;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            line = strip_comment(line);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw FormatError(origin + ":" + std::to_string(lineno) + ": bad section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw FormatError(origin + ":" + std::to_string(lineno) + ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = unquote(trim(line.substr(eq + 1)));
            if (key.empty()) throw FormatError(origin + ":" + std::to_string(lineno) + ": empty key");
            if (!section.empty()) key = section + "." + key;
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static KeyValueConfig load(const fs::path& path) { return parse(read_text(path), path.string()); }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw FormatError("config key '" + key + "': expected a number, got '" + it->second + "'");
        }
    }

    long get(const std::string& key, long fallback) const {
        const double v = get(key, double(fallback));
        if (v != std::floor(v)) throw FormatError("config key '" + key + "': expected an integer");
        return long(v);
    }

    int get(const std::string& key, int fallback) const { return int(get(key, long(fallback))); }

    bool get(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw FormatError("config key '" + key + "': expected true/false");
    }

    /// Comma-separated list, brackets optional: `a, b` or `["a", "b"]`.
    std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::string s = it->second;
        if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
        std::vector<std::string> out;
        std::istringstream in(s);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = unquote(trim(item));
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return {};
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }
    static std::string strip_comment(const std::string& s) {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (s[i] == '#' && !quoted) return s.substr(0, i);
        }
        return s;
    }
    static std::string unquote(const std::string& s) {
        if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
            return s.substr(1, s.size() - 2);
        return s;
    }

    std::map<std::string, std::string> values_;
};

/// Regular files in `dir` with the given extension, sorted by name.
inline std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace stripekit::io
