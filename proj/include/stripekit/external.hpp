#pragma once

#include <chrono>
#include <algorithm>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <thread>

#include <spawn.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "stripekit/detect.hpp"
#include "stripekit/evolve.hpp"
#include "stripekit/io.hpp"

extern char** environ;

namespace stripekit::external {

namespace fs = std::filesystem;

class ExternalError : public evolve::SampleFailure {
public:
    using evolve::SampleFailure::SampleFailure;
};

class TimeoutError : public ExternalError {
public:
    using ExternalError::ExternalError;
};

class ExitError : public ExternalError {
public:
    ExitError(const std::string& what, int code) : ExternalError(what), code(code) {}
    int code;
};

class MalformedMaskError : public ExternalError {
public:
    using ExternalError::ExternalError;
};

inline std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

/// Runs `command` through /bin/sh in its own process group. The group is
/// killed if it is still running after `timeout`. Returns the exit status.
inline int run_command(const std::string& command, std::chrono::milliseconds timeout) {
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);
    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    pid_t pid = 0;
    const int rc = posix_spawn(&pid, "/bin/sh", nullptr, &attr, const_cast<char* const*>(argv), environ);
    posix_spawnattr_destroy(&attr);
    if (rc != 0) throw ExternalError("external: cannot spawn /bin/sh: " + std::string(std::strerror(rc)));

    const auto deadline = std::chrono::steady_clock::now() + timeout;
    auto pause = std::chrono::milliseconds(1);
    int status = 0;
    for (;;) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0) throw ExternalError("external: waitpid failed");
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
            throw TimeoutError("external: command timed out after " + std::to_string(timeout.count()) + " ms");
        }
        std::this_thread::sleep_for(pause);
        pause = std::min(pause * 2, std::chrono::milliseconds(50));
    }
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

/// Invokes `<cmd> --image <pgm> --point u,v --out <png>` and reads the mask back.
inline BinaryMask external_segment(const std::string& cmd, const fs::path& image_path, Pixel point, int width,
                                   int height, const fs::path& out_path,
                                   std::chrono::milliseconds timeout = std::chrono::seconds(60)) {
    std::error_code ec;
    fs::remove(out_path, ec);
    const std::string line = cmd + " --image " + shell_quote(image_path.string()) + " --point " +
                             std::to_string(point.u) + "," + std::to_string(point.v) + " --out " +
                             shell_quote(out_path.string());
    const int code = run_command(line, timeout);
    if (code != 0) throw ExitError("external: command exited with status " + std::to_string(code), code);
    BinaryMask m;
    try {
        m = io::read_mask_png(out_path);
    } catch (const std::exception& e) {
        throw MalformedMaskError(std::string("external: unreadable mask: ") + e.what());
    }
    if (m.width() != width || m.height() != height)
        throw MalformedMaskError("external: mask is " + std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                                 ", expected " + std::to_string(width) + "x" + std::to_string(height));
    return m;
}

/// Prompted segmenter backed by an external command. Masks map to kHighProb
/// inside and kLowProb outside.
class ExternalSegmenter : public detect::Segmenter {
public:
    ExternalSegmenter(std::string cmd, fs::path work_dir, std::chrono::milliseconds timeout = std::chrono::seconds(60))
        : cmd_(std::move(cmd)), work_(std::move(work_dir)), timeout_(timeout) {
        fs::create_directories(work_);
    }
    std::string name() const override { return "external"; }
    detect::Capabilities capabilities() const override { return {true, false}; }
    GrayImage segment(const detect::PreparedImage& img, std::optional<Pixel> prompt) const override {
        const Pixel p = prompt.value_or(Pixel{img.image.width() / 2, img.image.height() / 2});
        const fs::path in = work_ / "input.pgm";
        const fs::path out = work_ / "output.png";
        io::write_pgm16(in, img.image);
        const BinaryMask m = external_segment(cmd_, in, p, img.image.width(), img.image.height(), out, timeout_);
        GrayImage prob(m.width(), m.height(), detect::kLowProb);
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i]) prob[i] = detect::kHighProb;
        return prob;
    }

private:
    std::string cmd_;
    fs::path work_;
    std::chrono::milliseconds timeout_;
};

}  // namespace stripekit::external
