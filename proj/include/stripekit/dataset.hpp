#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stripekit/io.hpp"
#include "stripekit/synth.hpp"

namespace stripekit::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kManifestVersion = 1;
inline const std::vector<std::string> kSplits{"train", "val", "test"};

inline synth::GeneratorConfig generator_config(const io::KeyValueConfig& kv, std::uint64_t seed) {
    synth::GeneratorConfig c;
    c.train_count = kv.get("train", c.train_count);
    c.val_count = kv.get("val", c.val_count);
    c.test_count = kv.get("test", c.test_count);
    c.width = kv.get("width", c.width);
    c.height = kv.get("height", c.height);
    c.snr_min = kv.get("snr_min", c.snr_min);
    c.snr_max = kv.get("snr_max", c.snr_max);
    c.length_min = kv.get("length_min", c.length_min);
    c.length_max = kv.get("length_max", c.length_max);
    c.width_sigma_min = kv.get("width_sigma_min", c.width_sigma_min);
    c.width_sigma_max = kv.get("width_sigma_max", c.width_sigma_max);
    c.max_stars = kv.get("max_stars", c.max_stars);
    c.max_cosmic_rays = kv.get("max_cosmic_rays", c.max_cosmic_rays);
    c.read_noise_min = kv.get("read_noise_min", c.read_noise_min);
    c.read_noise_max = kv.get("read_noise_max", c.read_noise_max);
    c.shot_noise_gain = kv.get("shot_noise_gain", c.shot_noise_gain);
    c.hot_pixel_rate = kv.get("hot_pixel_rate", c.hot_pixel_rate);
    c.base_level_min = kv.get("base_level_min", c.base_level_min);
    c.base_level_max = kv.get("base_level_max", c.base_level_max);
    c.stray_amplitude_max = kv.get("stray_amplitude_max", c.stray_amplitude_max);
    if (kv.has("families")) {
        c.families.clear();
        for (const auto& f : kv.get_list("families", {})) c.families.push_back(synth::stray_light_from_string(f));
    }
    if (kv.has("profiles")) {
        c.profiles.clear();
        for (const auto& p : kv.get_list("profiles", {})) c.profiles.push_back(synth::profile_from_string(p));
    }
    c.seed = seed;
    c.validate();
    return c;
}

inline json to_json(const synth::GeneratorConfig& c) {
    json fams = json::array();
    for (auto f : c.families) fams.push_back(synth::to_string(f));
    json profs = json::array();
    for (auto p : c.profiles) profs.push_back(synth::to_string(p));
    return {{"train", c.train_count},
            {"val", c.val_count},
            {"test", c.test_count},
            {"width", c.width},
            {"height", c.height},
            {"snr_min", c.snr_min},
            {"snr_max", c.snr_max},
            {"length_min", c.length_min},
            {"length_max", c.length_max},
            {"width_sigma_min", c.width_sigma_min},
            {"width_sigma_max", c.width_sigma_max},
            {"families", fams},
            {"profiles", profs},
            {"max_stars", c.max_stars},
            {"max_cosmic_rays", c.max_cosmic_rays},
            {"read_noise_min", c.read_noise_min},
            {"read_noise_max", c.read_noise_max},
            {"shot_noise_gain", c.shot_noise_gain},
            {"hot_pixel_rate", c.hot_pixel_rate},
            {"base_level_min", c.base_level_min},
            {"base_level_max", c.base_level_max},
            {"stray_amplitude_max", c.stray_amplitude_max},
            {"seed", c.seed}};
}

inline std::string frame_id(const std::string& split, int index) {
    std::ostringstream ss;
    ss << split << '_' << std::setw(5) << std::setfill('0') << index;
    return ss.str();
}

inline std::uint64_t split_tag(const std::string& split) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (char ch : split) h = (h ^ std::uint64_t(static_cast<unsigned char>(ch))) * 1099511628211ULL;
    return h;
}

inline std::uint64_t frame_seed(std::uint64_t seed, const std::string& split, int index) {
    return derive_seed(seed, {split_tag(split), std::uint64_t(index)});
}

/// Stray-light families rotate with the frame index, so every split is
/// balanced to within one frame per family.
inline synth::StrayLight family_for(const synth::GeneratorConfig& cfg, int index) {
    return cfg.families[std::size_t(index) % cfg.families.size()];
}

inline json label_json(const synth::GeneratedFrame& g, const std::string& mask_rel) {
    const auto& l = g.frame.labels;
    return {{"point", {l.point.u, l.point.v}},
            {"bbox", {l.bbox.u_min, l.bbox.v_min, l.bbox.u_max, l.bbox.v_max}},
            {"mask", mask_rel},
            {"snr", g.frame.snr},
            {"angle", g.spec.stripe.angle},
            {"length", g.spec.stripe.length},
            {"stray_light", synth::to_string(g.spec.stray_light)}};
}

/// Writes every split under `out_dir` as
///   <split>/images/<id>.pgm (16-bit) and <id>.png (8-bit),
///   <split>/masks/<id>.png, <split>/labels/<id>.json,
/// plus `manifest.json`. Returns the manifest.
inline json generate_dataset(const synth::GeneratorConfig& cfg, const fs::path& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    json manifest{{"version", kManifestVersion}, {"config", to_json(cfg)}, {"splits", json::object()}};
    const int counts[] = {cfg.train_count, cfg.val_count, cfg.test_count};
    for (std::size_t s = 0; s < kSplits.size(); ++s) {
        const std::string& split = kSplits[s];
        json entries = json::array();
        for (int i = 0; i < counts[s]; ++i) {
            const std::string id = frame_id(split, i);
            const auto g = synth::generate_frame(cfg, frame_seed(cfg.seed, split, i), family_for(cfg, i));
            const fs::path base = out_dir / split;
            io::write_pgm16(base / "images" / (id + ".pgm"), g.frame.image);
            io::write_png8(base / "images" / (id + ".png"), g.frame.image);
            io::write_mask_png(base / "masks" / (id + ".png"), g.frame.labels.mask);
            const json label = label_json(g, "../masks/" + id + ".png");
            io::write_text(base / "labels" / (id + ".json"), label.dump(2) + "\n");
            json entry = label;
            entry["id"] = id;
            entry["image"] = split + "/images/" + id + ".pgm";
            entry["image_png"] = split + "/images/" + id + ".png";
            entry["mask"] = split + "/masks/" + id + ".png";
            entry["label"] = split + "/labels/" + id + ".json";
            entries.push_back(std::move(entry));
        }
        manifest["splits"][split] = std::move(entries);
    }
    io::write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

/// One frame as loaded back from a generated dataset directory.
struct LabeledFrame {
    std::string id;
    GrayImage image;
    Pixel point;
    BinaryMask gt;
    std::string family;
    double snr = 0.0;
    double angle = 0.0;
};

inline LabeledFrame load_frame(const fs::path& root, const json& entry) {
    LabeledFrame f;
    f.id = entry.at("id").get<std::string>();
    f.image = io::read_pgm(root / entry.at("image").get<std::string>());
    f.point = {entry.at("point").at(0).get<int>(), entry.at("point").at(1).get<int>()};
    f.gt = io::read_mask_png(root / entry.at("mask").get<std::string>());
    f.family = entry.at("stray_light").get<std::string>();
    f.snr = entry.at("snr").get<double>();
    f.angle = entry.at("angle").get<double>();
    if (!same_shape(f.image, f.gt)) throw io::FormatError(f.id + ": image and mask sizes differ");
    return f;
}

/// Loads up to `limit` frames (all when limit <= 0) of one split.
inline std::vector<LabeledFrame> load_split(const fs::path& root, const std::string& split, int limit = 0) {
    const json manifest = json::parse(io::read_text(root / "manifest.json"));
    if (!manifest.contains("splits") || !manifest["splits"].contains(split))
        throw io::FormatError(root.string() + ": manifest has no split '" + split + "'");
    std::vector<LabeledFrame> out;
    for (const auto& e : manifest["splits"][split]) {
        if (limit > 0 && int(out.size()) >= limit) break;
        out.push_back(load_frame(root, e));
    }
    return out;
}

/// Generates frames in memory, skipping the file round trip.
inline std::vector<LabeledFrame> synthesize_split(const synth::GeneratorConfig& cfg, const std::string& split,
                                                  int count) {
    std::vector<LabeledFrame> out;
    for (int i = 0; i < count; ++i) {
        auto g = synth::generate_frame(cfg, frame_seed(cfg.seed, split, i), family_for(cfg, i));
        LabeledFrame f;
        f.id = frame_id(split, i);
        f.image = std::move(g.frame.image);
        f.point = g.frame.labels.point;
        f.gt = std::move(g.frame.labels.mask);
        f.family = synth::to_string(g.spec.stray_light);
        f.snr = g.frame.snr;
        f.angle = g.spec.stripe.angle;
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace stripekit::dataset
