#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "lrsaa/geometry.hpp"
#include "lrsaa/rng.hpp"

namespace lrsaa::test {

// Temporary directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static std::atomic<unsigned> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("lrsaa-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline BBox random_box(Rng& rng, double extent, double min_size, double max_size, int classes = 1) {
    const double w = rng.uniform(min_size, max_size);
    const double h = rng.uniform(min_size, max_size);
    const double x = rng.uniform(0.0, extent - w);
    const double y = rng.uniform(0.0, extent - h);
    return {x, y, x + w, y + h, static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))), rng.uniform()};
}

// Runs a shell command, returning its exit status (-1 if it did not exit).
inline int run_command(const std::string& cmd) {
    const int raw = std::system(cmd.c_str());
    if (raw == -1 || !WIFEXITED(raw)) return -1;
    return WEXITSTATUS(raw);
}

inline std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace lrsaa::test
