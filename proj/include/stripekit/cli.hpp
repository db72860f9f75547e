#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stripekit/dataset.hpp"
#include "stripekit/detect.hpp"
#include "stripekit/evolve.hpp"
#include "stripekit/external.hpp"
#include "stripekit/io.hpp"
#include "stripekit/losses.hpp"
#include "stripekit/metrics.hpp"

namespace stripekit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kRuntimeError = 3 };

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class StallError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kToolName = "stripekit";
inline constexpr int kRunRecordVersion = 1;

inline std::string fixed(double x, int digits = 6) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << x;
    return ss.str();
}

inline void write_run_record(const fs::path& path, const std::string& command, json resolved) {
    json rec{{"tool", kToolName}, {"version", kRunRecordVersion}, {"command", command}, {"config", std::move(resolved)}};
    io::write_text(path, rec.dump(2) + "\n");
}

inline io::KeyValueConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    io::KeyValueConfig kv = path.empty() ? io::KeyValueConfig{} : io::KeyValueConfig::load(path);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + o + "'");
        kv.set(o.substr(0, eq), o.substr(eq + 1));
    }
    return kv;
}

// ---------------------------------------------------------------------------
// evaluate

/// Scores every mask in `pred_dir` against the same-named mask in `gt_dir`.
/// Families come from `<gt_dir>/../labels/<id>.json` when present.
inline metrics::MetricReport evaluate_dirs(const fs::path& pred_dir, const fs::path& gt_dir) {
    const auto preds = io::list_files(pred_dir, ".png");
    if (preds.empty()) throw io::FormatError(pred_dir.string() + ": no .png masks to evaluate");
    const fs::path labels_dir = gt_dir.parent_path() / "labels";
    std::vector<metrics::PairScores> scores;
    for (const auto& p : preds) {
        const std::string id = p.stem().string();
        const fs::path g = gt_dir / p.filename();
        if (!fs::exists(g)) throw io::FormatError(g.string() + ": ground-truth mask missing for " + id);
        auto s = metrics::score_pair(io::read_mask_png(p), io::read_mask_png(g));
        s.id = id;
        const fs::path lab = labels_dir / (id + ".json");
        if (fs::exists(lab)) {
            const json j = json::parse(io::read_text(lab));
            if (j.contains("stray_light")) s.group = j["stray_light"].get<std::string>();
        }
        scores.push_back(std::move(s));
    }
    return metrics::aggregate(std::move(scores));
}

inline std::string report_csv(const metrics::MetricReport& r) {
    std::ostringstream ss;
    ss << "id,dice,iou,detected,fa_pixels\n";
    for (const auto& s : r.per_image)
        ss << s.id << ',' << fixed(s.dice) << ',' << fixed(s.iou) << ',' << (s.detected ? 1 : 0) << ','
           << s.false_alarm_pixels << '\n';
    return ss.str();
}

inline json aggregate_json(const metrics::Aggregate& a) {
    return {{"images", a.images},
            {"mean_dice", fixed(a.mean_dice)},
            {"miou", fixed(a.miou)},
            {"pd", fixed(a.pd)},
            {"fa_per_1e3", fixed(a.fa * 1e3)}};
}

inline json report_json(const metrics::MetricReport& r) {
    json groups = json::object();
    for (const auto& [g, a] : r.by_group) groups[g] = aggregate_json(a);
    return {{"overall", aggregate_json(r.overall)}, {"by_family", groups}};
}

// ---------------------------------------------------------------------------
// inspect

inline constexpr std::array<std::uint8_t, 3> kTruePositive{255, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kMissed{0, 0, 255};
inline constexpr std::array<std::uint8_t, 3> kFalseAlarm{255, 255, 0};

/// Gray image with true positives red, missed ground truth blue and false
/// alarms yellow.
inline io::RgbImage overlay(const GrayImage& image, const BinaryMask& gt, const BinaryMask& pred) {
    require_same_shape(image, gt, "overlay");
    require_same_shape(gt, pred, "overlay");
    io::RgbImage out(image.width(), image.height());
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (gt[i] && pred[i]) out.put(i, kTruePositive);
        else if (gt[i]) out.put(i, kMissed);
        else if (pred[i]) out.put(i, kFalseAlarm);
        else {
            const std::uint8_t g = io::to_u8(image[i]);
            out.put(i, {g, g, g});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// segmenters from config

/// Epochs per round for the evolving teacher unless `teacher.epochs` is set.
inline constexpr int kTeacherEpochs = 20;

struct TrainSettings {
    geometry::LossConfig loss;
    detect::TrainOptions options;
};

inline TrainSettings train_settings(const io::KeyValueConfig& kv) {
    TrainSettings t;
    t.loss.alpha = kv.get("loss.alpha", t.loss.alpha);
    t.loss.lambda = kv.get("loss.lambda", t.loss.lambda);
    t.loss.epsilon = kv.get("loss.epsilon", t.loss.epsilon);
    t.loss.binarize_threshold = kv.get("loss.binarize_threshold", t.loss.binarize_threshold);
    t.loss.focal_gamma = kv.get("loss.focal_gamma", t.loss.focal_gamma);
    t.loss.validate();
    t.options.epochs = kv.get("train.epochs", t.options.epochs);
    t.options.learning_rate = kv.get("train.learning_rate", t.options.learning_rate);
    t.options.momentum = kv.get("train.momentum", t.options.momentum);
    t.options.batch_size = kv.get("train.batch_size", t.options.batch_size);
    t.options.objective = geometry::objective_from_string(kv.get("train.objective", std::string("geodice")));
    if (t.options.epochs < 0 || !(t.options.learning_rate >= 0.0))
        throw std::invalid_argument("train: epochs and learning_rate must be non-negative");
    return t;
}

/// `base` with any `<section>.epochs/learning_rate/momentum/batch_size/adapter_only`
/// overrides applied.
inline detect::TrainOptions section_options(const io::KeyValueConfig& kv, const std::string& section,
                                            detect::TrainOptions base) {
    base.epochs = kv.get(section + ".epochs", base.epochs);
    base.learning_rate = kv.get(section + ".learning_rate", base.learning_rate);
    base.momentum = kv.get(section + ".momentum", base.momentum);
    base.batch_size = kv.get(section + ".batch_size", base.batch_size);
    base.adapter_only = kv.get(section + ".adapter_only", base.adapter_only);
    if (base.epochs < 0 || !(base.learning_rate >= 0.0))
        throw std::invalid_argument(section + ": epochs and learning_rate must be non-negative");
    return base;
}

inline json to_json(const TrainSettings& t) {
    return {{"loss.alpha", t.loss.alpha},
            {"loss.lambda", t.loss.lambda},
            {"loss.epsilon", t.loss.epsilon},
            {"loss.binarize_threshold", t.loss.binarize_threshold},
            {"loss.focal_gamma", t.loss.focal_gamma},
            {"train.epochs", t.options.epochs},
            {"train.learning_rate", t.options.learning_rate},
            {"train.momentum", t.options.momentum},
            {"train.batch_size", t.options.batch_size},
            {"train.objective", geometry::to_string(t.options.objective)}};
}

/// Builds the segmenter described by `<section>.kind` (matched, hough, lite,
/// prompted-lite or external). Lite models start from `<section>.model` when given.
inline std::unique_ptr<detect::Segmenter> make_segmenter(const io::KeyValueConfig& kv, const std::string& section,
                                                         const std::string& default_kind, const TrainSettings& train,
                                                         std::uint64_t seed, const fs::path& work_dir,
                                                         json& resolved) {
    const std::string kind = kv.get(section + ".kind", default_kind);
    resolved[section + ".kind"] = kind;
    if (kind == "matched") {
        detect::MatchedFilterParams p;
        p.threshold = kv.get(section + ".threshold", p.threshold);
        p.scale = kv.get(section + ".scale", p.scale);
        resolved[section + ".threshold"] = p.threshold;
        resolved[section + ".scale"] = p.scale;
        return std::make_unique<detect::MatchedFilterSegmenter>(p);
    }
    if (kind == "hough") return std::make_unique<detect::HoughSegmenter>();
    if (kind == "lite" || kind == "prompted-lite") {
        const std::string model_path = kv.get(section + ".model", std::string());
        detect::LiteModel m = !model_path.empty()   ? detect::model_from_text(io::read_text(model_path))
                              : kind == "lite"      ? detect::LiteModel::initial()
                                                    : detect::LiteModel::initial_prompted();
        if (m.prompted != (kind == "prompted-lite"))
            throw std::invalid_argument(section + ": model file does not match kind '" + kind + "'");
        resolved[section + ".model"] = model_path;
        detect::TrainOptions opt = section_options(kv, section, train.options);
        opt.seed = seed;
        resolved[section + ".epochs"] = opt.epochs;
        resolved[section + ".learning_rate"] = opt.learning_rate;
        resolved[section + ".momentum"] = opt.momentum;
        resolved[section + ".batch_size"] = opt.batch_size;
        resolved[section + ".adapter_only"] = opt.adapter_only;
        return std::make_unique<detect::LiteSegmenter>(std::move(m), train.loss, opt);
    }
    if (kind == "external") {
        const std::string cmd = kv.get(section + ".command", std::string());
        if (cmd.empty()) throw std::invalid_argument(section + ": external segmenter needs a command");
        const double timeout = kv.get(section + ".timeout", 60.0);
        resolved[section + ".command"] = cmd;
        resolved[section + ".timeout"] = timeout;
        return std::make_unique<external::ExternalSegmenter>(
            cmd, work_dir / ("external_" + section), std::chrono::milliseconds(std::llround(timeout * 1000.0)));
    }
    throw std::invalid_argument(section + ": unknown segmenter kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// evolve

inline std::string history_csv(const std::vector<evolve::HistoryEntry>& h) {
    std::ostringstream ss;
    ss << "round,origin,count,mean_dice\n";
    for (const auto& e : h)
        ss << e.round << ',' << evolve::to_string(e.origin) << ',' << e.count << ','
           << (e.mean_dice ? fixed(*e.mean_dice) : std::string()) << '\n';
    return ss.str();
}

inline std::vector<evolve::PoolItem> load_pool(const fs::path& root, const std::string& split, int limit) {
    std::vector<evolve::PoolItem> pool;
    for (auto& f : dataset::load_split(root, split, limit)) {
        evolve::PoolItem item;
        item.id = std::move(f.id);
        item.prepared = detect::prepare(std::move(f.image));
        item.point = f.point;
        item.gt = std::move(f.gt);
        item.family = std::move(f.family);
        pool.push_back(std::move(item));
    }
    if (pool.empty()) throw io::FormatError(root.string() + ": split '" + split + "' is empty");
    return pool;
}

inline void write_round(const fs::path& dir, const std::vector<evolve::PoolItem>& pool,
                        const evolve::PseudoDataset& d) {
    fs::create_directories(dir);
    std::ostringstream prompts;
    prompts << "id,u,v\n";
    for (const auto& s : d.samples) {
        io::write_mask_png(dir / (pool[s.index].id + ".png"), s.label);
        prompts << pool[s.index].id << ',' << s.point.u << ',' << s.point.v << '\n';
    }
    io::write_text(dir / "prompts.csv", prompts.str());
}

inline void write_model_if_lite(const fs::path& path, const detect::Segmenter& seg) {
    if (const auto* lite = dynamic_cast<const detect::LiteSegmenter*>(&seg))
        io::write_text(path, detect::model_to_text(lite->model()));
}

/// One row per epoch of every fit made by the lite segmenters among `segs`.
inline std::string loss_trace_csv(const std::vector<std::pair<std::string, const detect::Segmenter*>>& segs) {
    std::ostringstream ss;
    ss << "model,fit,epoch,loss\n";
    for (const auto& [name, seg] : segs) {
        const auto* lite = dynamic_cast<const detect::LiteSegmenter*>(seg);
        if (!lite) continue;
        for (std::size_t f = 0; f < lite->traces().size(); ++f)
            for (std::size_t e = 0; e < lite->traces()[f].size(); ++e)
                ss << name << ',' << f + 1 << ',' << e << ',' << fixed(lite->traces()[f][e], 10) << '\n';
    }
    return ss.str();
}

// ---------------------------------------------------------------------------
// loss-check

struct GradientCheck {
    std::string objective;
    double value = 0.0;
    double max_rel_error = 0.0;
    int checked = 0;
};

/// Central differences against the analytic gradient at `samples` pixels that
/// sit away from the binarization threshold and the focal clamp.
inline GradientCheck check_gradient(geometry::Objective o, const GrayImage& pred, const BinaryMask& label,
                                    const geometry::LossConfig& cfg, int samples, std::uint64_t seed,
                                    double h = 1e-4) {
    GradientCheck out{geometry::to_string(o)};
    const auto analytic = geometry::objective_loss(o, pred, label, cfg);
    out.value = analytic.value;
    Rng rng(seed);
    for (int tries = 0; out.checked < samples && tries < samples * 50; ++tries) {
        const std::size_t i = std::size_t(uniform_int(rng, 0, int(pred.size()) - 1));
        const double p = pred[i];
        if (std::abs(p - cfg.binarize_threshold) < 10 * h || p < 10 * h || p > 1 - 10 * h) continue;
        GrayImage hi = pred, lo = pred;
        hi[i] = p + h;
        lo[i] = p - h;
        const double num = (geometry::objective_loss(o, hi, label, cfg).value -
                            geometry::objective_loss(o, lo, label, cfg).value) / (2 * h);
        const double ana = analytic.grad[i];
        const double scale = std::max(std::abs(num), std::abs(ana));
        if (scale > 1e-10) out.max_rel_error = std::max(out.max_rel_error, std::abs(num - ana) / scale);
        ++out.checked;
    }
    return out;
}

// ---------------------------------------------------------------------------

struct Streams {
    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
};

namespace detail {

struct Options {
    std::uint64_t seed = 0;
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    // detect
    std::string images, method = "matched", model, labels;
    double threshold = 0.5;
    // evaluate
    std::string pred, gt, report = "csv";
    // evolve
    std::string pool;
    int iterations = -1;
    // inspect
    std::string image, label;
    // loss-check
    int samples = 100;
};

inline int cmd_generate(const Options& o, Streams& s) {
    const auto kv = load_config(o.config, o.overrides);
    const auto cfg = dataset::generator_config(kv, o.seed);
    const fs::path out = o.out;
    const json manifest = dataset::generate_dataset(cfg, out);
    write_run_record(out / "run.json", "generate", {{"seed", o.seed}, {"generator", dataset::to_json(cfg)}});
    std::size_t n = 0;
    for (const auto& [split, entries] : manifest["splits"].items()) n += entries.size();
    s.out << "generated " << n << " frames in " << out.string() << "\n";
    return kOk;
}

inline std::vector<fs::path> input_images(const fs::path& dir) {
    auto files = io::list_files(dir, ".pgm");
    if (files.empty()) files = io::list_files(dir, ".png");
    if (files.empty()) throw io::FormatError(dir.string() + ": no .pgm or .png images");
    return files;
}

inline int cmd_detect(const Options& o, Streams& s) {
    const auto kv = load_config(o.config, o.overrides);
    const fs::path out = o.out;
    fs::create_directories(out);
    json resolved{{"seed", o.seed}, {"images", o.images}, {"method", o.method}, {"labels", o.labels},
                  {"threshold", o.threshold}};
    io::KeyValueConfig seg_kv = kv;
    seg_kv.set("detector.kind", o.method);
    if (!o.model.empty()) seg_kv.set("detector.model", o.model);
    const TrainSettings train = train_settings(kv);
    if ((o.method == "lite" || o.method == "prompted-lite") && !seg_kv.has("detector.model"))
        throw UsageError("detect --method " + o.method + " needs --model");
    if (o.method == "prompted-lite" && o.labels.empty()) throw UsageError("detect --method prompted-lite needs --labels");
    auto seg = make_segmenter(seg_kv, "detector", o.method, train, o.seed, out, resolved);

    std::size_t written = 0;
    for (const auto& path : input_images(o.images)) {
        const std::string id = path.stem().string();
        const auto prepared = detect::prepare(io::read_image(path));
        std::optional<Pixel> point;
        if (!o.labels.empty()) {
            const json j = json::parse(io::read_text(fs::path(o.labels) / (id + ".json")));
            point = Pixel{j.at("point").at(0).get<int>(), j.at("point").at(1).get<int>()};
        }
        const GrayImage prob = seg->segment(prepared, point);
        const BinaryMask mask = point ? detect::prompt_select(prob, *point, o.threshold) : binarize(prob, o.threshold);
        io::write_mask_png(out / (id + ".png"), mask);
        ++written;
    }
    write_run_record(out / "run.json", "detect", resolved);
    s.out << "wrote " << written << " masks to " << out.string() << "\n";
    return kOk;
}

inline int cmd_evaluate(const Options& o, Streams& s) {
    if (o.report != "csv" && o.report != "json") throw UsageError("--report must be csv or json");
    const auto report = evaluate_dirs(o.pred, o.gt);
    const fs::path out = o.out.empty() ? fs::path(".") : fs::path(o.out);
    fs::create_directories(out);
    const std::string text = o.report == "csv" ? report_csv(report) : report_json(report).dump(2) + "\n";
    io::write_text(out / ("report." + o.report), text);
    write_run_record(out / "run.json", "evaluate",
                     {{"pred", o.pred}, {"gt", o.gt}, {"report", o.report}, {"seed", o.seed}});
    const auto& a = report.overall;
    s.out << "images " << a.images << "  mean_dice " << fixed(a.mean_dice) << "  miou " << fixed(a.miou) << "  pd "
          << fixed(a.pd) << "  fa(1e-3) " << fixed(a.fa * 1e3) << "\n";
    return kOk;
}

inline int cmd_evolve(const Options& o, Streams& s) {
    const auto kv = load_config(o.config, o.overrides);
    const fs::path out = o.out;
    fs::create_directories(out);
    for (const auto& e : fs::directory_iterator(out))
        if (e.is_directory() && e.path().filename().string().rfind("round_", 0) == 0) fs::remove_all(e.path());

    evolve::EvolutionConfig cfg;
    cfg.iterations = o.iterations > 0 ? o.iterations : kv.get("evolve.iterations", cfg.iterations);
    cfg.min_area = kv.get("evolve.min_area", cfg.min_area);
    cfg.prompt_threshold = kv.get("evolve.prompt_threshold", cfg.prompt_threshold);
    cfg.prompt_radius = kv.get("evolve.prompt_radius", cfg.prompt_radius);
    cfg.evaluation_mode = kv.get("evolve.evaluation", cfg.evaluation_mode);
    cfg.seed = o.seed;
    cfg.validate();
    const std::string split = kv.get("pool.split", std::string("train"));
    const int pool_size = kv.get("pool.size", 0);
    const TrainSettings train = train_settings(kv);

    json resolved{{"seed", o.seed},
                  {"pool", o.pool},
                  {"pool.split", split},
                  {"pool.size", pool_size},
                  {"evolve.iterations", cfg.iterations},
                  {"evolve.min_area", cfg.min_area},
                  {"evolve.prompt_threshold", cfg.prompt_threshold},
                  {"evolve.prompt_radius", cfg.prompt_radius},
                  {"evolve.evaluation", cfg.evaluation_mode}};
    resolved.update(to_json(train));
    auto teacher0 = make_segmenter(kv, "teacher0", "matched", train, derive_seed(o.seed, {0}), out, resolved);
    // the teacher is fine-tuned adapter-style: bias and prompt weight only
    TrainSettings teacher_train = train;
    teacher_train.options.adapter_only = true;
    teacher_train.options.epochs = kTeacherEpochs;
    auto teacher =
        make_segmenter(kv, "teacher", "prompted-lite", teacher_train, derive_seed(o.seed, {1}), out, resolved);
    auto student = make_segmenter(kv, "student", "lite", train, derive_seed(o.seed, {2}), out, resolved);
    write_run_record(out / "run.json", "evolve", resolved);

    const auto pool = load_pool(o.pool, split, pool_size);
    const evolve::EvolutionResult r = evolve::evolve_loop(cfg, pool, *teacher0, *teacher, *student);
    for (const auto& d : r.rounds) write_round(out / ("round_" + d.tag()), pool, d);
    io::write_text(out / "history.csv", history_csv(r.history));
    write_model_if_lite(out / "teacher.model", *teacher);
    write_model_if_lite(out / "student.model", *student);
    io::write_text(out / "loss_traces.csv", loss_trace_csv({{"teacher", teacher.get()}, {"student", student.get()}}));
    for (const auto& h : r.history)
        s.out << "round " << h.tag << "  count " << h.count << "/" << pool.size()
              << (h.mean_dice ? "  mean_dice " + fixed(*h.mean_dice) : std::string()) << "\n";
    if (r.stalled) throw StallError("evolution stalled: " + r.stall_reason);
    return kOk;
}

inline int cmd_inspect(const Options& o, Streams& s) {
    const GrayImage image = io::read_image(o.image);
    const BinaryMask gt = io::read_mask_png(o.label);
    const BinaryMask pred = o.pred.empty() ? BinaryMask(gt.width(), gt.height()) : io::read_mask_png(o.pred);
    const fs::path out = o.out;
    io::write_rgb_png(out, overlay(image, gt, pred));
    fs::path record = out;
    record.replace_extension(".run.json");
    write_run_record(record, "inspect", {{"image", o.image}, {"label", o.label}, {"pred", o.pred}});
    s.out << "wrote " << out.string() << "\n";
    return kOk;
}

inline int cmd_loss_check(const Options& o, Streams& s) {
    const auto kv = load_config(o.config, o.overrides);
    const TrainSettings train = train_settings(kv);
    GrayImage pred;
    BinaryMask label;
    if (!o.pred.empty() || !o.label.empty()) {
        if (o.pred.empty() || o.label.empty()) throw UsageError("loss-check needs both --pred and --label");
        pred = io::read_gray_png(o.pred);
        label = io::read_mask_png(o.label);
        require_same_shape(pred, label, "loss-check");
        for (double& x : pred.pixels()) x = std::clamp(x, 0.001, 0.999);
    } else {
        // random map around a seeded stripe label
        synth::StripeParams st;
        Rng rng(derive_seed(o.seed, {7}));
        st.center = {uniform(rng, 24, 40), uniform(rng, 24, 40)};
        st.length = uniform(rng, 16, 30);
        st.width_sigma = 1.2;
        st.angle = uniform(rng, 0.0, std::numbers::pi);
        label = binarize(synth::render_stripe(st, 64, 64), synth::kMaskThreshold);
        pred = GrayImage(64, 64);
        for (std::size_t i = 0; i < pred.size(); ++i)
            pred[i] = label[i] ? uniform(rng, 0.3, 0.95) : uniform(rng, 0.02, 0.6);
    }
    const fs::path out = o.out.empty() ? fs::path(".") : fs::path(o.out);
    json results = json::array();
    bool ok = true;
    for (auto obj : {geometry::Objective::geodice, geometry::Objective::dice, geometry::Objective::soft_iou,
                     geometry::Objective::dice_focal, geometry::Objective::soft_iou_focal}) {
        const auto c = check_gradient(obj, pred, label, train.loss, o.samples, derive_seed(o.seed, {8}));
        ok = ok && c.max_rel_error <= 1e-4;
        s.out << std::left << std::setw(16) << c.objective << " loss " << fixed(c.value, 8) << "  max_rel_err "
              << std::scientific << std::setprecision(2) << c.max_rel_error << std::defaultfloat << "  ("
              << c.checked << " px)\n";
        results.push_back({{"objective", c.objective},
                           {"value", c.value},
                           {"max_rel_error", c.max_rel_error},
                           {"checked", c.checked}});
    }
    fs::create_directories(out);
    io::write_text(out / "loss_check.json", results.dump(2) + "\n");
    json resolved = to_json(train);
    resolved["seed"] = o.seed;
    resolved["pred"] = o.pred;
    resolved["label"] = o.label;
    resolved["samples"] = o.samples;
    write_run_record(out / "run.json", "loss-check", resolved);
    return ok ? kOk : kRuntimeError;
}

}  // namespace detail

/// Entry point shared by the binary and the tests. Returns the process exit code.
inline int run(const std::vector<std::string>& args, Streams streams = {}) {
    detail::Options o;
    CLI::App app{"Stripe-target synthesis, detection and label evolution", kToolName};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    auto common = [&](CLI::App* c, bool with_config) {
        c->add_option("--seed", o.seed, "Global seed");
        if (with_config) {
            c->add_option("--config", o.config, "TOML-style key = value config file")->check(CLI::ExistingFile);
            c->add_option("--set", o.overrides, "Config override key=value (repeatable)");
        }
    };

    auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
    common(gen, true);
    gen->add_option("--out", o.out, "Output directory")->required();

    auto* det = app.add_subcommand("detect", "Segment a directory of images");
    common(det, true);
    det->add_option("--images", o.images, "Input image directory")->required()->check(CLI::ExistingDirectory);
    det->add_option("--out", o.out, "Mask output directory")->required();
    det->add_option("--method", o.method, "matched | hough | lite | prompted-lite | external")
        ->check(CLI::IsMember({"matched", "hough", "lite", "prompted-lite", "external"}));
    det->add_option("--model", o.model, "Lite model file");
    det->add_option("--labels", o.labels, "Label JSON directory; enables point prompts");
    det->add_option("--threshold", o.threshold, "Binarization threshold");

    auto* ev = app.add_subcommand("evaluate", "Score predicted masks against ground truth");
    common(ev, false);
    ev->add_option("--pred", o.pred, "Predicted mask directory")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--gt", o.gt, "Ground-truth mask directory")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--report", o.report, "csv (per image) or json (grouped by family)");
    ev->add_option("--out", o.out, "Report directory (default .)");

    auto* evo = app.add_subcommand("evolve", "Run teacher-student label evolution");
    common(evo, true);
    evo->add_option("--pool", o.pool, "Dataset directory holding the candidate pool")
        ->required()
        ->check(CLI::ExistingDirectory);
    evo->add_option("--out", o.out, "Output directory")->required();
    evo->add_option("--iterations", o.iterations, "Teacher/student round pairs")->check(CLI::PositiveNumber);

    auto* ins = app.add_subcommand("inspect", "Render a detection overlay");
    ins->add_option("--image", o.image, "Image (.pgm or .png)")->required()->check(CLI::ExistingFile);
    ins->add_option("--label", o.label, "Ground-truth mask")->required()->check(CLI::ExistingFile);
    ins->add_option("--pred", o.pred, "Predicted mask")->check(CLI::ExistingFile);
    ins->add_option("--out", o.out, "Output PNG")->required();

    auto* lc = app.add_subcommand("loss-check", "Print losses and finite-difference gradient errors");
    common(lc, true);
    lc->add_option("--pred", o.pred, "Probability map PNG")->check(CLI::ExistingFile);
    lc->add_option("--label", o.label, "Label mask PNG")->check(CLI::ExistingFile);
    lc->add_option("--samples", o.samples, "Pixels to check")->check(CLI::PositiveNumber);
    lc->add_option("--out", o.out, "Output directory (default .)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        streams.out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        streams.out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        streams.err << kToolName << ": " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        if (*gen) return detail::cmd_generate(o, streams);
        if (*det) return detail::cmd_detect(o, streams);
        if (*ev) return detail::cmd_evaluate(o, streams);
        if (*evo) return detail::cmd_evolve(o, streams);
        if (*ins) return detail::cmd_inspect(o, streams);
        if (*lc) return detail::cmd_loss_check(o, streams);
    } catch (const UsageError& e) {
        streams.err << kToolName << ": " << e.what() << "\n";
        return kUsage;
    } catch (const StallError& e) {
        streams.err << kToolName << ": " << e.what() << "\n";
        return kRuntimeError;
    } catch (const io::IoError& e) {
        streams.err << kToolName << ": " << e.what() << "\n";
        return kDataError;
    } catch (const json::exception& e) {
        streams.err << kToolName << ": bad JSON: " << e.what() << "\n";
        return kDataError;
    } catch (const std::invalid_argument& e) {
        streams.err << kToolName << ": " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        streams.err << kToolName << ": " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsage;
}

inline int run(int argc, char** argv, Streams streams = {}) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, streams);
}

}  // namespace stripekit::cli
