#include <doctest.h>

#include <cstdlib>

#include "lrsaa/detector.hpp"
#include "lrsaa/error.hpp"
#include "lrsaa/raster.hpp"
#include "support.hpp"

using namespace lrsaa;

namespace {

DetectorSpec plugin(const std::string& mode) {
    DetectorSpec s;
    s.name = "fake";
    s.kind = DetectorKind::plugin;
    s.command = {FAKE_PLUGIN_PATH, mode};
    return s;
}

std::vector<TileRequest> requests(const test::TempDir& dir, int n, int side = 64) {
    std::vector<TileRequest> out;
    ImageRaster blank(side, side, 1);
    for (int i = 0; i < n; ++i) {
        const auto path = dir / ("tile_" + std::to_string(i) + ".png");
        write_png(path, blank);
        out.push_back({i * 3 + 1, side, path});
    }
    return out;
}

}  // namespace

TEST_CASE("empty plugin gives empty sets for every tile") {
    test::TempDir dir;
    const auto req = requests(dir, 4);
    const auto sets = run_plugin(plugin("empty"), req);
    REQUIRE(sets.size() == 4);
    for (std::size_t i = 0; i < sets.size(); ++i) {
        CHECK(sets[i].tile_id == req[i].tile_id);
        CHECK(sets[i].frame == Frame::local);
        CHECK(sets[i].detector_name == "fake");
        CHECK(sets[i].boxes.empty());
    }
}

TEST_CASE("fixed plugin loops one box back per tile") {
    test::TempDir dir;
    const auto req = requests(dir, 5);
    for (const char* mode : {"fixed", "reverse"}) {
        const auto sets = run_plugin(plugin(mode), req);
        REQUIRE(sets.size() == 5);
        for (std::size_t i = 0; i < sets.size(); ++i) {
            CHECK(sets[i].tile_id == req[i].tile_id);
            REQUIRE(sets[i].boxes.size() == 1);
            CHECK(sets[i].boxes[0] == BBox{10, 20, 30, 40, 1, 0.66});
        }
    }
}

TEST_CASE("plugin reads the tile rasters") {
    test::TempDir dir;
    ImageRaster img(64, 64, 1);
    for (int y = 5; y < 15; ++y)
        for (int x = 20; x < 44; ++x) img.row(y)[x] = 160;
    write_png(dir / "t.png", img);
    const auto sets = run_plugin(plugin("bright"), {{0, 64, dir / "t.png"}});
    REQUIRE(sets.size() == 1);
    REQUIRE(sets[0].boxes.size() == 1);
    CHECK(sets[0].boxes[0] == BBox{20, 5, 44, 15, 0, 0.9});
}

TEST_CASE("protocol violations") {
    test::TempDir dir;
    const auto req = requests(dir, 3);
    for (const char* mode : {"oob", "malformed", "missing", "duplicate", "unknown"}) {
        CAPTURE(mode);
        CHECK_THROWS_AS(run_plugin(plugin(mode), req), ProtocolError);
    }
}

TEST_CASE("out-of-bounds error names the tile") {
    test::TempDir dir;
    const auto req = requests(dir, 1);
    try {
        run_plugin(plugin("oob"), req);
        FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
        CHECK(std::string(e.what()).find(std::to_string(req[0].tile_id)) != std::string::npos);
    }
}

TEST_CASE("plugin failure reports stderr") {
    test::TempDir dir;
    const auto req = requests(dir, 2);
    try {
        run_plugin(plugin("crash"), req);
        FAIL("expected PluginError");
    } catch (const PluginError& e) {
        CHECK(std::string(e.what()).find("boom") != std::string::npos);
    }
    DetectorSpec missing = plugin("empty");
    missing.command = {"/nonexistent/lrsaa-plugin"};
    CHECK_THROWS_AS(run_plugin(missing, req), PluginError);
}

TEST_CASE("bare command names are resolved through LRSAA_PLUGIN_PATH") {
    test::TempDir dir;
    const auto req = requests(dir, 1);
    const std::filesystem::path exe = FAKE_PLUGIN_PATH;
    const char* old = std::getenv("LRSAA_PLUGIN_PATH");
    const std::string saved = old ? old : "";
    ::setenv("LRSAA_PLUGIN_PATH", exe.parent_path().c_str(), 1);
    DetectorSpec s = plugin("fixed");
    s.command[0] = exe.filename().string();
    const auto sets = run_plugin(s, req);
    if (old) ::setenv("LRSAA_PLUGIN_PATH", saved.c_str(), 1);
    else ::unsetenv("LRSAA_PLUGIN_PATH");
    REQUIRE(sets.size() == 1);
    CHECK(sets[0].boxes.size() == 1);
}

TEST_CASE("empty batch does not need a process") {
    CHECK(run_plugin(plugin("crash"), {}).empty());
}
