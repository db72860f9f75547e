#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stripekit/detect.hpp"
#include "stripekit/geometry.hpp"
#include "stripekit/losses.hpp"
#include "stripekit/metrics.hpp"

namespace stripekit::evolve {

using geometry::mass_center;

/// One image of the candidate pool with its human single-point label.
/// `gt` is only consulted for history reporting in evaluation mode.
struct PoolItem {
    std::string id;
    detect::PreparedImage prepared;
    Pixel point;
    std::optional<BinaryMask> gt;
    std::string family;
};

/// Accepted pseudo-label for pool item `index`; `point` is the prompt that
/// goes with it (the label's mass center).
struct Sample {
    std::size_t index = 0;
    Pixel point;
    BinaryMask label;
};

enum class Origin { init, teacher, student };

inline std::string to_string(Origin o) {
    switch (o) {
        case Origin::init: return "init";
        case Origin::teacher: return "teacher";
        case Origin::student: return "student";
    }
    return "?";
}

struct PseudoDataset {
    std::vector<Sample> samples;
    int round = 0;
    Origin origin = Origin::init;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    /// Directory tag for this round: "0", "1t", "1s", ...
    std::string tag() const {
        if (origin == Origin::init) return std::to_string(round);
        return std::to_string(round) + (origin == Origin::teacher ? "t" : "s");
    }
};

struct EvolutionConfig {
    int iterations = 3;
    int min_area = geometry::kDefaultMinArea;
    double prompt_threshold = 0.5;
    double prompt_radius = detect::kDefaultPromptRadius;
    bool evaluation_mode = true;  // report Dice against gt when the pool has it
    std::uint64_t seed = 0;

    void validate() const {
        if (iterations < 1) throw std::invalid_argument("EvolutionConfig: iterations must be >= 1");
        if (min_area < 1) throw std::invalid_argument("EvolutionConfig: min_area must be >= 1");
    }
};

class EmptyInitializationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by segmenters that fail on a single sample (e.g. an external
/// process); the round skips that sample and carries on.
class SampleFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Current prompt per pool item plus the original human points.
struct PromptState {
    std::vector<Pixel> original;
    std::vector<Pixel> current;

    explicit PromptState(const std::vector<PoolItem>& pool) {
        for (const auto& item : pool) original.push_back(item.point);
        current = original;
    }

    /// Accepted samples move to their mass centers; everything else falls
    /// back to the original single-point label.
    void update(const PseudoDataset& d) {
        current = original;
        for (const auto& s : d.samples) current[s.index] = s.point;
    }
};

/// Runs `seg` over the whole pool with the given prompts and keeps the masks
/// that survive prompt selection and the connected-area check.
inline PseudoDataset label_pool(const detect::Segmenter& seg, const std::vector<PoolItem>& pool,
                                const std::vector<Pixel>& prompts, const EvolutionConfig& cfg, int round,
                                Origin origin, std::size_t* failures = nullptr) {
    PseudoDataset out;
    out.round = round;
    out.origin = origin;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        GrayImage prob;
        try {
            prob = seg.segment(pool[i].prepared, prompts[i]);
        } catch (const SampleFailure&) {
            if (failures) ++*failures;
            continue;
        }
        BinaryMask mask = detect::prompt_select(prob, prompts[i], cfg.prompt_threshold, cfg.prompt_radius);
        if (!mask.any() || !geometry::connected_area_check(mask, cfg.min_area)) continue;
        out.samples.push_back({i, mass_center(mask), std::move(mask)});
    }
    return out;
}

inline std::vector<detect::TrainingExample> training_view(const std::vector<PoolItem>& pool, const PseudoDataset& d) {
    std::vector<detect::TrainingExample> out;
    out.reserve(d.size());
    for (const auto& s : d.samples) out.push_back({&pool[s.index].prepared, &s.label, s.point});
    return out;
}

/// Initial pseudo-labels from the zero-shot teacher and the human points.
inline PseudoDataset init_pseudo_labels(const detect::Segmenter& teacher0, const std::vector<PoolItem>& pool,
                                        const EvolutionConfig& cfg = {}) {
    if (pool.empty()) throw std::invalid_argument("init_pseudo_labels: empty pool");
    PromptState prompts(pool);
    PseudoDataset d0 = label_pool(teacher0, pool, prompts.original, cfg, 0, Origin::init);
    if (d0.empty()) throw EmptyInitializationError("init_pseudo_labels: no pseudo-label passed the filter");
    return d0;
}

/// Teacher round: refit (when trainable) on the previous dataset, relabel the
/// full pool. An empty result signals a stall.
inline PseudoDataset teacher_round(detect::Segmenter& teacher, const std::vector<PoolItem>& pool,
                                   const PseudoDataset& prev, const std::vector<Pixel>& prompts,
                                   const EvolutionConfig& cfg, int round) {
    if (teacher.capabilities().trainable) {
        const auto data = training_view(pool, prev);
        teacher.fit(data);
    }
    return label_pool(teacher, pool, prompts, cfg, round, Origin::teacher);
}

/// Student round: train on the teacher's dataset, relabel the full pool.
inline PseudoDataset student_round(detect::Segmenter& student, const std::vector<PoolItem>& pool,
                                   const PseudoDataset& d_t, const std::vector<Pixel>& prompts,
                                   const EvolutionConfig& cfg, int round) {
    if (d_t.empty()) throw std::invalid_argument("student_round: empty teacher dataset");
    if (student.capabilities().trainable) {
        const auto data = training_view(pool, d_t);
        student.fit(data);
    }
    return label_pool(student, pool, prompts, cfg, round, Origin::student);
}

struct HistoryEntry {
    int round = 0;
    Origin origin = Origin::init;
    std::string tag;
    std::size_t count = 0;
    std::optional<double> mean_dice;  // percent, evaluation mode only
};

/// Mean Dice (percent) of a dataset's labels against the pool ground truth,
/// or nothing when any referenced item lacks ground truth.
inline std::optional<double> mean_dice_vs_gt(const std::vector<PoolItem>& pool, const PseudoDataset& d) {
    if (d.empty()) return std::nullopt;
    std::vector<metrics::PairScores> scores;
    for (const auto& s : d.samples) {
        const auto& gt = pool[s.index].gt;
        if (!gt || !gt->any()) return std::nullopt;
        scores.push_back(metrics::score_pair(s.label, *gt));
    }
    return metrics::aggregate(std::move(scores)).overall.mean_dice;
}

struct EvolutionResult {
    std::vector<PseudoDataset> rounds;  // init, then teacher/student pairs
    std::vector<HistoryEntry> history;
    bool stalled = false;
    std::string stall_reason;
};

inline HistoryEntry record(const std::vector<PoolItem>& pool, const PseudoDataset& d, const EvolutionConfig& cfg) {
    HistoryEntry h{d.round, d.origin, d.tag(), d.size(), std::nullopt};
    if (cfg.evaluation_mode) h.mean_dice = mean_dice_vs_gt(pool, d);
    return h;
}

/// Label evolution: init, then `iterations` teacher/student round pairs over
/// the full pool. Segmenters are updated in place (warm starts); a round that
/// accepts nothing ends the loop early with the partial history.
inline EvolutionResult evolve_loop(const EvolutionConfig& cfg, const std::vector<PoolItem>& pool,
                                   const detect::Segmenter& teacher0, detect::Segmenter& teacher,
                                   detect::Segmenter& student) {
    cfg.validate();
    EvolutionResult out;
    PromptState prompts(pool);
    out.rounds.push_back(init_pseudo_labels(teacher0, pool, cfg));
    out.history.push_back(record(pool, out.rounds.back(), cfg));
    prompts.update(out.rounds.back());

    for (int it = 1; it <= cfg.iterations; ++it) {
        PseudoDataset d_t = teacher_round(teacher, pool, out.rounds.back(), prompts.current, cfg, it);
        out.rounds.push_back(std::move(d_t));
        out.history.push_back(record(pool, out.rounds.back(), cfg));
        if (out.rounds.back().empty()) {
            out.stalled = true;
            out.stall_reason = "teacher round " + std::to_string(it) + " accepted no samples";
            return out;
        }
        prompts.update(out.rounds.back());

        PseudoDataset d_s = student_round(student, pool, out.rounds.back(), prompts.current, cfg, it);
        out.rounds.push_back(std::move(d_s));
        out.history.push_back(record(pool, out.rounds.back(), cfg));
        if (out.rounds.back().empty()) {
            out.stalled = true;
            out.stall_reason = "student round " + std::to_string(it) + " accepted no samples";
            return out;
        }
        prompts.update(out.rounds.back());
    }
    return out;
}

/// Unprompted evaluation of a segmenter: binarize the full probability map and
/// score it against ground truth, grouped by stray-light family.
inline metrics::MetricReport evaluate_segmenter(const detect::Segmenter& seg, const std::vector<PoolItem>& frames,
                                                double threshold = 0.5) {
    std::vector<metrics::PairScores> scores;
    for (const auto& f : frames) {
        if (!f.gt) throw std::invalid_argument("evaluate_segmenter: frame " + f.id + " has no ground truth");
        auto s = metrics::score_pair(binarize(seg.segment(f.prepared, std::nullopt), threshold), *f.gt);
        s.id = f.id;
        s.group = f.family;
        scores.push_back(std::move(s));
    }
    return metrics::aggregate(std::move(scores));
}

}  // namespace stripekit::evolve
