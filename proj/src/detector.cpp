#include "lrsaa/detector.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <map>
#include <mutex>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "lrsaa/error.hpp"
#include "lrsaa/rng.hpp"

extern char** environ;

namespace lrsaa {

NoiseProfile NoiseProfile::realistic(std::uint64_t seed) {
    NoiseProfile p;
    p.score_model = {0.8, 0.1, 0.3, 0.1};
    p.seed = seed;
    return p;
}

void validate(const NoiseProfile& p) {
    if (!(p.jitter_sigma >= 0.0)) throw ValidationError("noise profile: jitter_sigma must be >= 0");
    if (!(p.miss_rate >= 0.0 && p.miss_rate <= 1.0)) throw ValidationError("noise profile: miss_rate must be in [0,1]");
    if (!(p.spurious_rate >= 0.0)) throw ValidationError("noise profile: spurious_rate must be >= 0");
    if (!(p.visibility >= 0.0 && p.visibility <= 1.0))
        throw ValidationError("noise profile: visibility must be in [0,1]");
    if (p.input_side < 0) throw ValidationError("noise profile: input_side must be >= 0");
    if (!(p.min_object_px > 0.0)) throw ValidationError("noise profile: min_object_px must be > 0");
    if (!(p.spurious_min_px > 0.0) || p.spurious_max_px < p.spurious_min_px)
        throw ValidationError("noise profile: spurious size range must satisfy 0 < min <= max");
    if (!(p.score_model.true_sigma >= 0.0) || !(p.score_model.false_sigma >= 0.0))
        throw ValidationError("noise profile: score sigmas must be >= 0");
}

void validate(const DetectorSpec& spec) {
    if (spec.name.empty()) throw ValidationError("detector: name must not be empty");
    if (!(spec.weight > 0.0) || !std::isfinite(spec.weight))
        throw ValidationError("detector '" + spec.name + "': weight must be positive");
    if (spec.kind == DetectorKind::plugin && (spec.command.empty() || spec.command.front().empty()))
        throw ValidationError("detector '" + spec.name + "': plugin command must not be empty");
    if (spec.kind == DetectorKind::synthetic) validate(spec.noise);
}

DetectionSet synthetic_detect(const AnnotationSet& gt, const Tile& tile, const NoiseProfile& profile,
                              const std::string& detector_name) {
    validate(profile);
    DetectionSet out;
    out.detector_name = detector_name;
    out.tile_id = tile.tile_id;
    out.frame = Frame::local;

    Rng rng(mix_seed(mix_seed(profile.seed, static_cast<std::uint64_t>(tile.origin_x)),
                     (static_cast<std::uint64_t>(tile.origin_y) << 24) ^ static_cast<std::uint64_t>(tile.side)));

    const BBox window{double(tile.origin_x), double(tile.origin_y), double(tile.origin_x) + tile.side,
                      double(tile.origin_y) + tile.side};
    const double side = tile.side;
    const double scale =
        (profile.input_side > 0 && tile.side > profile.input_side) ? double(profile.input_side) / tile.side : 1.0;

    for (const auto& b : gt.boxes) {
        const double area = b.area();
        if (!(area > 0.0)) continue;
        const double inter = intersection_area(b, window);
        if (inter <= 0.0 || inter / area < profile.visibility) continue;

        BBox local = b;
        local.x_min = std::max(b.x_min, window.x_min) - tile.origin_x;
        local.y_min = std::max(b.y_min, window.y_min) - tile.origin_y;
        local.x_max = std::min(b.x_max, window.x_max) - tile.origin_x;
        local.y_max = std::min(b.y_max, window.y_max) - tile.origin_y;

        // Fixed number of draws per visible object.
        const double u_miss = rng.uniform();
        const double j[4] = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        const double s = rng.normal(profile.score_model.true_mean, profile.score_model.true_sigma);

        const double extent = std::sqrt(local.area()) * scale;
        const double p_scale = std::clamp((profile.min_object_px - extent) / (profile.min_object_px / 2.0), 0.0, 1.0);
        const double p_miss = 1.0 - (1.0 - profile.miss_rate) * (1.0 - p_scale);
        if (u_miss < p_miss) continue;

        if (profile.jitter_sigma > 0.0) {
            const double x0 = local.x_min + profile.jitter_sigma * j[0];
            const double y0 = local.y_min + profile.jitter_sigma * j[1];
            const double x1 = local.x_max + profile.jitter_sigma * j[2];
            const double y1 = local.y_max + profile.jitter_sigma * j[3];
            local.x_min = std::clamp(std::min(x0, x1), 0.0, side);
            local.x_max = std::clamp(std::max(x0, x1), 0.0, side);
            local.y_min = std::clamp(std::min(y0, y1), 0.0, side);
            local.y_max = std::clamp(std::max(y0, y1), 0.0, side);
        }
        local.score = std::clamp(s, 0.0, 1.0);
        out.boxes.push_back(local);
    }

    int class_count = static_cast<int>(gt.classes.size());
    if (class_count == 0)
        for (const auto& b : gt.boxes) class_count = std::max(class_count, b.class_id + 1);
    class_count = std::max(class_count, 1);

    const std::uint64_t spurious = rng.poisson(profile.spurious_rate);
    for (std::uint64_t i = 0; i < spurious; ++i) {
        const double w = std::min(side, rng.uniform(profile.spurious_min_px, profile.spurious_max_px));
        const double h = std::min(side, rng.uniform(profile.spurious_min_px, profile.spurious_max_px));
        const double x = rng.uniform() * (side - w);
        const double y = rng.uniform() * (side - h);
        const int cls = static_cast<int>(rng.below(static_cast<std::uint64_t>(class_count)));
        const double s = rng.normal(profile.score_model.false_mean, profile.score_model.false_sigma);
        out.boxes.push_back({x, y, x + w, y + h, cls, std::clamp(s, 0.0, 1.0)});
    }
    return out;
}

void check_local_bounds(const DetectionSet& set, int side) {
    for (const auto& b : set.boxes) {
        if (!is_valid(b))
            throw ProtocolError("detector '" + set.detector_name + "', tile " + std::to_string(set.tile_id) +
                                ": invalid box or score outside [0,1]");
        if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > side || b.y_max > side)
            throw ProtocolError("detector '" + set.detector_name + "', tile " + std::to_string(set.tile_id) +
                                ": box outside tile bounds [0, " + std::to_string(side) + "]^2");
    }
}

namespace {

bool is_executable(const std::filesystem::path& p) {
    struct stat st {};
    return ::stat(p.c_str(), &st) == 0 && S_ISREG(st.st_mode) && ::access(p.c_str(), X_OK) == 0;
}

std::filesystem::path resolve_executable(const std::string& name) {
    if (name.find('/') != std::string::npos) return name;
    for (const char* var : {"LRSAA_PLUGIN_PATH", "PATH"}) {
        const char* value = std::getenv(var);
        if (!value) continue;
        std::stringstream dirs(value);
        std::string dir;
        while (std::getline(dirs, dir, ':')) {
            if (dir.empty()) continue;
            auto candidate = std::filesystem::path(dir) / name;
            if (is_executable(candidate)) return candidate;
        }
    }
    throw PluginError("plugin executable '" + name + "' not found in LRSAA_PLUGIN_PATH or PATH");
}

void ignore_sigpipe_once() {
    static std::once_flag flag;
    std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

struct ProcessOutput {
    std::string out;
    std::string err;
    int status = 0;
};

ProcessOutput run_process(const std::filesystem::path& exe, const std::vector<std::string>& command,
                          const std::string& input) {
    ignore_sigpipe_once();

    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw PluginError("pipe() failed");
    Fd in_r(in_pipe[0]), in_w(in_pipe[1]);
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw PluginError("pipe() failed");
    Fd out_r(out_pipe[0]), out_w(out_pipe[1]);
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) throw PluginError("pipe() failed");
    Fd err_r(err_pipe[0]), err_w(err_pipe[1]);

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_r.fd, STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_w.fd, STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(&actions, err_w.fd, STDERR_FILENO);

    std::vector<std::string> args = command;
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    pid_t pid = 0;
    const int rc = ::posix_spawn(&pid, exe.c_str(), &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) throw PluginError("cannot start plugin '" + exe.string() + "': " + std::strerror(rc));

    in_r.reset();
    out_w.reset();
    err_w.reset();
    ::fcntl(in_w.fd, F_SETFL, O_NONBLOCK);

    ProcessOutput result;
    std::size_t written = 0;
    if (input.empty()) in_w.reset();
    char buf[65536];
    while (out_r.fd >= 0 || err_r.fd >= 0) {
        pollfd fds[3];
        int n = 0;
        int idx_in = -1, idx_out = -1, idx_err = -1;
        if (in_w.fd >= 0) {
            fds[n] = {in_w.fd, POLLOUT, 0};
            idx_in = n++;
        }
        if (out_r.fd >= 0) {
            fds[n] = {out_r.fd, POLLIN, 0};
            idx_out = n++;
        }
        if (err_r.fd >= 0) {
            fds[n] = {err_r.fd, POLLIN, 0};
            idx_err = n++;
        }
        if (::poll(fds, n, -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (idx_in >= 0 && fds[idx_in].revents) {
            if (fds[idx_in].revents & (POLLERR | POLLHUP)) {
                in_w.reset();
            } else {
                const ssize_t w = ::write(in_w.fd, input.data() + written, input.size() - written);
                if (w > 0) written += static_cast<std::size_t>(w);
                else if (w < 0 && errno != EAGAIN && errno != EINTR) in_w.reset();
                if (written == input.size()) in_w.reset();
            }
        }
        auto drain = [&](int idx, Fd& fd, std::string& sink) {
            if (idx < 0 || !fds[idx].revents) return;
            const ssize_t r = ::read(fd.fd, buf, sizeof buf);
            if (r > 0) sink.append(buf, static_cast<std::size_t>(r));
            else if (r == 0 || (errno != EAGAIN && errno != EINTR)) fd.reset();
        };
        drain(idx_out, out_r, result.out);
        drain(idx_err, err_r, result.err);
    }
    in_w.reset();

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    result.status = status;
    return result;
}

std::string tail(const std::string& s, std::size_t n = 2000) {
    return s.size() <= n ? s : "..." + s.substr(s.size() - n);
}

}  // namespace

std::vector<DetectionSet> run_plugin(const DetectorSpec& spec, const std::vector<TileRequest>& tiles) {
    if (spec.kind != DetectorKind::plugin) throw ValidationError("run_plugin: detector '" + spec.name + "' is not a plugin");
    validate(spec);
    if (tiles.empty()) return {};

    std::map<int, std::size_t> index_of;
    std::string input;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        if (!index_of.emplace(tiles[i].tile_id, i).second)
            throw ValidationError("run_plugin: duplicate tile id " + std::to_string(tiles[i].tile_id));
        nlohmann::json req = {{"tile_id", tiles[i].tile_id}, {"side", tiles[i].side}, {"raster", tiles[i].raster.string()}};
        input += req.dump();
        input += '\n';
    }

    const auto exe = resolve_executable(spec.command.front());
    const ProcessOutput proc = run_process(exe, spec.command, input);

    if (WIFSIGNALED(proc.status))
        throw PluginError("plugin '" + spec.name + "' killed by signal " + std::to_string(WTERMSIG(proc.status)) +
                          "; stderr: " + tail(proc.err));
    if (!WIFEXITED(proc.status) || WEXITSTATUS(proc.status) != 0) {
        const int code = WIFEXITED(proc.status) ? WEXITSTATUS(proc.status) : -1;
        throw PluginError("plugin '" + spec.name + "' exited with status " + std::to_string(code) +
                          (code == 127 ? " (could not execute)" : "") + "; stderr: " + tail(proc.err));
    }

    std::vector<DetectionSet> result(tiles.size());
    std::vector<bool> answered(tiles.size(), false);
    std::istringstream lines(proc.out);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        nlohmann::json resp;
        try {
            resp = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError("plugin '" + spec.name + "': malformed JSON on response line " +
                                std::to_string(line_no) + ": " + e.what());
        }
        if (!resp.is_object() || !resp.contains("tile_id") || !resp["tile_id"].is_number_integer())
            throw ProtocolError("plugin '" + spec.name + "': response line " + std::to_string(line_no) +
                                " lacks an integer tile_id");
        const int tile_id = resp["tile_id"].get<int>();
        const std::string where = "plugin '" + spec.name + "', tile " + std::to_string(tile_id);
        auto it = index_of.find(tile_id);
        if (it == index_of.end()) throw ProtocolError(where + ": response for a tile that was not requested");
        if (answered[it->second]) throw ProtocolError(where + ": duplicate response");
        if (!resp.contains("detections") || !resp["detections"].is_array())
            throw ProtocolError(where + ": missing detections array");

        DetectionSet set;
        set.detector_name = spec.name;
        set.tile_id = tile_id;
        set.frame = Frame::local;
        for (const auto& d : resp["detections"]) {
            try {
                BBox b;
                b.x_min = d.at("x_min").get<double>();
                b.y_min = d.at("y_min").get<double>();
                b.x_max = d.at("x_max").get<double>();
                b.y_max = d.at("y_max").get<double>();
                if (!d.at("class_id").is_number_integer()) throw ProtocolError("class_id must be an integer");
                b.class_id = d.at("class_id").get<int>();
                b.score = d.at("score").get<double>();
                set.boxes.push_back(b);
            } catch (const nlohmann::json::exception& e) {
                throw ProtocolError(where + ": malformed detection: " + e.what());
            } catch (const ProtocolError& e) {
                throw ProtocolError(where + ": malformed detection: " + e.what());
            }
        }
        check_local_bounds(set, tiles[it->second].side);
        answered[it->second] = true;
        result[it->second] = std::move(set);
    }

    std::vector<int> missing;
    for (std::size_t i = 0; i < tiles.size(); ++i)
        if (!answered[i]) missing.push_back(tiles[i].tile_id);
    if (!missing.empty()) {
        std::string ids;
        for (std::size_t i = 0; i < missing.size() && i < 10; ++i) ids += (i ? ", " : "") + std::to_string(missing[i]);
        if (missing.size() > 10) ids += ", ...";
        throw ProtocolError("plugin '" + spec.name + "': no response for " + std::to_string(missing.size()) +
                            " tile(s): " + ids);
    }
    return result;
}

}  // namespace lrsaa
