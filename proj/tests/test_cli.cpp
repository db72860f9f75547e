#include <gtest/gtest.h>

#include <cstdlib>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include "scratch.hpp"
#include "stripekit/cli.hpp"
#include "stripekit/io.hpp"

using namespace stripekit;
using nlohmann::json;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    cli::Streams s{out, err};
    Result r;
    r.code = cli::run(args, s);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// Small dataset shared by the tests that need one.
const fs::path& small_dataset() {
    static ScratchDir dir("cli_data");
    static const bool made = [] {
        const Result r = run({"generate", "--out", dir.path().string(), "--seed", "5", "--set", "train=12", "--set",
                              "val=3", "--set", "test=2"});
        EXPECT_EQ(r.code, 0) << r.err;
        return true;
    }();
    (void)made;
    return dir.path();
}

std::vector<std::string> fast_evolve(const fs::path& pool, const fs::path& out) {
    return {"evolve", "--pool", pool.string(), "--out", out.string(), "--seed", "3", "--iterations", "1",
            "--set", "train.epochs=3", "--set", "teacher.epochs=2"};
}

std::map<std::array<std::uint8_t, 3>, std::size_t> color_counts(const fs::path& png) {
    const io::PngData d = io::read_png(png);
    std::map<std::array<std::uint8_t, 3>, std::size_t> counts;
    for (std::size_t i = 0; i < std::size_t(d.width) * std::size_t(d.height); ++i)
        ++counts[{d.pixels[3 * i], d.pixels[3 * i + 1], d.pixels[3 * i + 2]}];
    return counts;
}

std::vector<std::string> csv_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::string csv_field(const std::string& line, int index) {
    std::istringstream in(line);
    std::string f;
    for (int i = 0; i <= index; ++i) std::getline(in, f, ',');
    return f;
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run({}).code, 1);
    const Result r = run({"generate", "--bogus"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({"generate"}).code, 1);  // --out is required
    EXPECT_EQ(run({"generate", "--out", "x", "--config", "/no/such/file.toml"}).code, 1);
    EXPECT_EQ(run({"generate", "--out", "x", "--set", "novalue"}).code, 1);
}

TEST(Cli, HelpExitsZero) {
    const Result r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("evolve"), std::string::npos);
}

TEST(Cli, DataErrorsExitTwo) {
    ScratchDir dir("cli_data_err");
    io::write_text(dir / "bad.toml", "snr_min = lots\n");
    EXPECT_EQ(run({"generate", "--out", (dir / "g").string(), "--config", (dir / "bad.toml").string()}).code, 2);
    EXPECT_EQ(run({"generate", "--out", (dir / "g").string(), "--set", "snr_min=0"}).code, 2);
    fs::create_directories(dir / "empty");
    EXPECT_EQ(run({"evaluate", "--pred", (dir / "empty").string(), "--gt", (dir / "empty").string()}).code, 2);
}

TEST(Cli, GenerateIsIdempotent) {
    ScratchDir dir("cli_gen");
    const std::vector<std::string> base{"generate", "--seed", "7", "--set", "train=4", "--set", "val=2",
                                        "--set", "test=2", "--out"};
    auto a = base, b = base;
    a.push_back((dir / "a").string());
    b.push_back((dir / "b").string());
    ASSERT_EQ(run(a).code, 0);
    ASSERT_EQ(run(b).code, 0);
    EXPECT_EQ(io::read_text(dir / "a/manifest.json"), io::read_text(dir / "b/manifest.json"));
    EXPECT_EQ(io::read_text(dir / "a/train/masks/train_00003.png"), io::read_text(dir / "b/train/masks/train_00003.png"));
    ASSERT_EQ(run(a).code, 0);
    EXPECT_EQ(io::read_text(dir / "a/manifest.json"), io::read_text(dir / "b/manifest.json"));
    const json rec = json::parse(io::read_text(dir / "a/run.json"));
    EXPECT_EQ(rec["command"], "generate");
    EXPECT_EQ(rec["config"]["seed"], 7);
    EXPECT_EQ(rec["config"]["generator"]["train"], 4);
}

TEST(Cli, EvaluateAgainstItselfIsPerfect) {
    const fs::path data = small_dataset();
    ScratchDir dir("cli_eval");
    const std::string masks = (data / "val/masks").string();
    const Result r = run({"evaluate", "--pred", masks, "--gt", masks, "--report", "json", "--out", dir.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json rep = json::parse(io::read_text(dir / "report.json"));
    EXPECT_EQ(rep["overall"]["mean_dice"], "100.000000");
    EXPECT_EQ(rep["overall"]["pd"], "100.000000");
    EXPECT_EQ(rep["overall"]["fa_per_1e3"], "0.000000");
    EXPECT_EQ(rep["overall"]["images"], 3);
    EXPECT_FALSE(rep["by_family"].empty());
    EXPECT_EQ(run({"evaluate", "--pred", masks, "--gt", masks, "--report", "xml"}).code, 1);
}

TEST(Cli, EvaluateMissingGroundTruthIsDataError) {
    const fs::path data = small_dataset();
    const Result r = run({"evaluate", "--pred", (data / "train/masks").string(), "--gt", (data / "val/masks").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("ground-truth mask missing"), std::string::npos);
}

TEST(Cli, InspectColors) {
    ScratchDir dir("cli_inspect");
    const int w = 20, h = 10;
    io::write_png8(dir / "img.png", GrayImage(w, h, 0.2));
    BinaryMask gt(w, h), half(w, h);
    for (int u = 2; u < 12; ++u) gt.set(u, 4);    // 10 gt pixels
    for (int u = 7; u < 15; ++u) half.set(u, 4);  // 5 overlap, 3 false alarm
    io::write_mask_png(dir / "gt.png", gt);
    io::write_mask_png(dir / "half.png", half);
    const std::array<std::uint8_t, 3> red{255, 0, 0}, blue{0, 0, 255}, yellow{255, 255, 0}, bg{51, 51, 51};
    const std::size_t n = std::size_t(w * h);

    ASSERT_EQ(run({"inspect", "--image", (dir / "img.png").string(), "--label", (dir / "gt.png").string(), "--pred",
                   (dir / "gt.png").string(), "--out", (dir / "same.png").string()})
                  .code,
              0);
    auto c = color_counts(dir / "same.png");
    EXPECT_EQ(c.size(), 2u);
    EXPECT_EQ(c[red], 10u);
    EXPECT_EQ(c[bg], n - 10);

    ASSERT_EQ(run({"inspect", "--image", (dir / "img.png").string(), "--label", (dir / "gt.png").string(), "--out",
                   (dir / "empty.png").string()})
                  .code,
              0);
    c = color_counts(dir / "empty.png");
    EXPECT_EQ(c.size(), 2u);
    EXPECT_EQ(c[blue], 10u);

    ASSERT_EQ(run({"inspect", "--image", (dir / "img.png").string(), "--label", (dir / "gt.png").string(), "--pred",
                   (dir / "half.png").string(), "--out", (dir / "half_overlay.png").string()})
                  .code,
              0);
    c = color_counts(dir / "half_overlay.png");
    EXPECT_EQ(c[red], 5u);
    EXPECT_EQ(c[blue], 5u);
    EXPECT_EQ(c[yellow], 3u);
    EXPECT_EQ(c[bg], n - 13);

    io::write_mask_png(dir / "small.png", BinaryMask(4, 4));
    EXPECT_EQ(run({"inspect", "--image", (dir / "img.png").string(), "--label", (dir / "small.png").string(), "--out",
                   (dir / "bad.png").string()})
                  .code,
              2);
}

TEST(Cli, LossCheckPasses) {
    ScratchDir dir("cli_loss");
    const Result r = run({"loss-check", "--seed", "4", "--out", dir.path().string()});
    ASSERT_EQ(r.code, 0) << r.out << r.err;
    const json j = json::parse(io::read_text(dir / "loss_check.json"));
    ASSERT_EQ(j.size(), 5u);
    for (const auto& e : j) {
        EXPECT_LE(e["max_rel_error"].get<double>(), 1e-4) << e["objective"];
        EXPECT_EQ(e["checked"], 100);
    }
}

TEST(Cli, DetectWritesOneMaskPerImage) {
    const fs::path data = small_dataset();
    ScratchDir dir("cli_detect");
    const Result r = run({"detect", "--images", (data / "val/images").string(), "--labels",
                          (data / "val/labels").string(), "--out", dir.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(io::list_files(dir.path(), ".png").size(), 3u);
    EXPECT_TRUE(fs::exists(dir / "run.json"));
    EXPECT_EQ(run({"detect", "--images", (data / "val/images").string(), "--out", dir.path().string(), "--method",
                   "prompted-lite"})
                  .code,
              1);
    EXPECT_EQ(run({"detect", "--images", (data / "val/images").string(), "--out", dir.path().string(), "--method",
                   "nonsense"})
                  .code,
              1);
}

TEST(Cli, EvolveThenEvaluateAgrees) {
    const fs::path data = small_dataset();
    ScratchDir dir("cli_evolve");
    const Result r = run(fast_evolve(data, dir / "run"));
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* d : {"round_0", "round_1t", "round_1s"}) EXPECT_TRUE(fs::is_directory(dir / "run" / d)) << d;
    EXPECT_TRUE(fs::exists(dir / "run/student.model"));
    EXPECT_TRUE(fs::exists(dir / "run/teacher.model"));
    const auto traces = csv_lines(io::read_text(dir / "run/loss_traces.csv"));
    ASSERT_GT(traces.size(), 1u);
    EXPECT_EQ(traces[0], "model,fit,epoch,loss");

    const auto lines = csv_lines(io::read_text(dir / "run/history.csv"));
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(lines[0], "round,origin,count,mean_dice");
    const std::string last_dice = csv_field(lines.back(), 3);

    const Result e = run({"evaluate", "--pred", (dir / "run/round_1s").string(), "--gt",
                          (data / "train/masks").string(), "--report", "json", "--out", (dir / "eval").string()});
    ASSERT_EQ(e.code, 0) << e.err;
    const json rep = json::parse(io::read_text(dir / "eval/report.json"));
    EXPECT_EQ(rep["overall"]["mean_dice"].get<std::string>(), last_dice);
    EXPECT_EQ(std::to_string(rep["overall"]["images"].get<int>()), csv_field(lines.back(), 2));
}

TEST(Cli, EvolveIsDeterministic) {
    const fs::path data = small_dataset();
    ScratchDir dir("cli_evolve_det");
    ASSERT_EQ(run(fast_evolve(data, dir / "a")).code, 0);
    ASSERT_EQ(run(fast_evolve(data, dir / "b")).code, 0);
    EXPECT_EQ(io::read_text(dir / "a/history.csv"), io::read_text(dir / "b/history.csv"));
    EXPECT_EQ(io::read_text(dir / "a/student.model"), io::read_text(dir / "b/student.model"));
    for (const auto& f : io::list_files(dir / "a/round_1s", ".png"))
        EXPECT_EQ(io::read_text(f), io::read_text(dir / "b/round_1s" / f.filename()));
}

TEST(Cli, EvolveRecordsSectionOverrides) {
    const fs::path data = small_dataset();
    ScratchDir dir("cli_evolve_cfg");
    io::write_text(dir / "evolve.toml",
                   "[pool]\nsize = 6\n[student]\nepochs = 2\nlearning_rate = 0.25\n[teacher0]\nthreshold = 0.4\n");
    auto args = fast_evolve(data, dir / "run");
    args.insert(args.end(), {"--config", (dir / "evolve.toml").string()});
    const Result r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const json cfg = json::parse(io::read_text(dir / "run/run.json"))["config"];
    EXPECT_EQ(cfg["pool.size"], 6);
    EXPECT_EQ(cfg["student.epochs"], 2);
    EXPECT_EQ(cfg["student.learning_rate"], 0.25);
    EXPECT_EQ(cfg["teacher.epochs"], 2);
    EXPECT_EQ(cfg["teacher.adapter_only"], true);
    EXPECT_EQ(cfg["teacher0.threshold"], 0.4);
    EXPECT_EQ(cfg["student.kind"], "lite");
    EXPECT_EQ(cfg["teacher.kind"], "prompted-lite");
}

TEST(Cli, EvolveStallExitsThree) {
    const fs::path data = small_dataset();
    ScratchDir dir("cli_stall");
    io::write_text(dir / "fail.sh", "#!/bin/sh\nexit 1\n");
    fs::permissions(dir / "fail.sh", fs::perms::owner_all);
    auto args = fast_evolve(data, dir / "run");
    args.insert(args.end(), {"--set", "student.kind=external", "--set", "student.command=" + (dir / "fail.sh").string()});
    const Result r = run(args);
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("stalled"), std::string::npos);
    EXPECT_EQ(csv_lines(io::read_text(dir / "run/history.csv")).size(), 4u);
    EXPECT_EQ(csv_field(csv_lines(io::read_text(dir / "run/history.csv")).back(), 2), "0");
}

TEST(Cli, EvolveUnknownSegmenterIsDataError) {
    const fs::path data = small_dataset();
    ScratchDir dir("cli_kind");
    auto args = fast_evolve(data, dir / "run");
    args.insert(args.end(), {"--set", "teacher.kind=oracle"});
    EXPECT_EQ(run(args).code, 2);
}

TEST(Cli, BinaryExitCodes) {
    const std::string bin = STRIPEKIT_CLI_PATH;
    auto status = [&](const std::string& args) {
        const int rc = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    };
    EXPECT_EQ(status("--help"), 0);
    EXPECT_EQ(status("generate --nope"), 1);
    EXPECT_EQ(status("evaluate --pred / --gt /"), 2);
}

TEST(Cli, ExampleConfigsMatchDefaults) {
    const fs::path dir = fs::path(STRIPEKIT_SOURCE_DIR) / "examples/configs";
    const auto gen = io::KeyValueConfig::load(dir / "generate.toml");
    EXPECT_EQ(dataset::to_json(dataset::generator_config(gen, 0)), dataset::to_json(synth::GeneratorConfig{}));

    const auto kv = io::KeyValueConfig::load(dir / "evolve.toml");
    const cli::TrainSettings t = cli::train_settings(kv);
    EXPECT_EQ(cli::to_json(t), cli::to_json(cli::TrainSettings{}));
    json resolved;
    ScratchDir work("cli_cfg");
    for (const char* section : {"teacher0", "teacher", "student"})
        EXPECT_NO_THROW(cli::make_segmenter(kv, section, "matched", t, 0, work.path(), resolved)) << section;
    EXPECT_EQ(resolved["teacher.epochs"], cli::kTeacherEpochs);
    EXPECT_EQ(resolved["teacher.adapter_only"], true);
    EXPECT_EQ(kv.get("pool.size", 0), 200);
}
