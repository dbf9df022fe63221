// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. All tolerances are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "coverage_oracle.hpp"
#include "lrsaa/eval.hpp"
#include "lrsaa/formats.hpp"
#include "lrsaa/fusion.hpp"
#include "lrsaa/pipeline.hpp"
#include "lrsaa/poisson.hpp"
#include "lrsaa/rng.hpp"
#include "lrsaa/scene.hpp"
#include "lrsaa/synthgen.hpp"
#include "lrsaa/tiling.hpp"
#include "support.hpp"

using namespace lrsaa;

namespace {

// Pinned limits.
constexpr int kPoissonRuns = 1000;
constexpr int kPoissonMaxSide = 4096;
constexpr double kPoissonMaxExpectedPoints = 3000.0;
constexpr double kPoissonBudgetSeconds = 30.0;

constexpr int kCoverageInstances = 200;
constexpr int kCoverageMaxDim = 6000;

constexpr int kRemapPairs = 10000;

constexpr int kNmsSmallInstances = 1000;
constexpr int kNmsSmallMaxBoxes = 20;
constexpr int kNmsLargeInstances = 50;
constexpr int kNmsLargeBoxes = 5000;
constexpr int kNmsTimedBoxes = 10000;
constexpr double kNmsBudgetSeconds = 1.0;

constexpr double kApTolerance = 1e-12;

constexpr double kTiledRecallMin = 0.95;
constexpr double kWholeRecallMax = 0.2;

constexpr double kLocalizationMaxPx = 1.0;

constexpr int kMixPool = 1000;
constexpr int kMixMaxCountError = 1;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ------------------------------------------------------------------ 1

Outcome poisson_min_distance() {
    Rng rng(0xACCE1);
    int violations = 0, oracle_checked = 0, oracle_disagree = 0;
    std::size_t total_points = 0, max_points = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int run = 0; run < kPoissonRuns; ++run) {
        const double w = 1.0 + rng.below(kPoissonMaxSide);
        const double h = 1.0 + rng.below(kPoissonMaxSide);
        // Log-uniform radius, floored so the expected count stays bounded.
        const double r_floor = std::sqrt(w * h / kPoissonMaxExpectedPoints);
        const double r = std::max(r_floor, std::exp(rng.uniform(std::log(2.0), std::log(1000.0))));
        const PointSet ps = sample_poisson({w, h}, r, kDefaultPoissonAttempts, rng.next());
        total_points += ps.points.size();
        max_points = std::max(max_points, ps.points.size());
        const bool ok = verify_min_distance(ps);
        if (!ok) ++violations;
        // Independent all-pairs check on smaller sets.
        if (ps.points.size() <= 1500) {
            ++oracle_checked;
            bool oracle_ok = true;
            for (std::size_t i = 0; i < ps.points.size() && oracle_ok; ++i)
                for (std::size_t j = i + 1; j < ps.points.size(); ++j) {
                    const double dx = ps.points[i].x - ps.points[j].x, dy = ps.points[i].y - ps.points[j].y;
                    if (std::sqrt(dx * dx + dy * dy) < r) {
                        oracle_ok = false;
                        break;
                    }
                }
            if (oracle_ok != ok) ++oracle_disagree;
            if (!oracle_ok) ++violations;
        }
        for (const auto& p : ps.points)
            if (!(p.x >= 0 && p.x < w && p.y >= 0 && p.y < h)) ++violations;
    }
    const double secs = seconds_since(t0);
    return {violations == 0 && oracle_disagree == 0 && secs < kPoissonBudgetSeconds,
            fmt("%d runs, %zu points (max %zu/run), %d violations, %d all-pairs cross-checks, %.2f s (limit %.0f s)",
                kPoissonRuns, total_points, max_points, violations, oracle_checked, secs, kPoissonBudgetSeconds)};
}

// ------------------------------------------------------------------ 2

Outcome coverage_guarantee() {
    Rng rng(0xC0FE);
    const int sides[] = {320, 640, 1280};
    int bad = 0;
    std::int64_t uncovered = 0;
    std::size_t tiles = 0;
    for (int i = 0; i < kCoverageInstances; ++i) {
        const int side = sides[rng.below(3)];
        const int w = 1 + static_cast<int>(rng.below(kCoverageMaxDim));
        const int h = 1 + static_cast<int>(rng.below(kCoverageMaxDim));
        const TilePlan p = plan_tiles(w, h, side, side / 2.0, 30, rng.next());
        const std::int64_t u = test::uncovered_pixels(p);
        uncovered += u;
        tiles += p.tiles.size();
        if (p.coverage_fraction != 1.0 || u != 0 || !test::tiles_in_bounds(p)) ++bad;
    }
    return {bad == 0, fmt("%d instances, %zu tiles, %lld uncovered pixels, %d failing plans", kCoverageInstances,
                          tiles, static_cast<long long>(uncovered), bad)};
}

// ------------------------------------------------------------------ 3

Outcome remap_round_trip() {
    Rng rng(0x4E3A);
    int bad = 0;
    for (int i = 0; i < kRemapPairs; ++i) {
        const int side = 1 + static_cast<int>(rng.below(2048));
        const Tile t{i, static_cast<int>(rng.below(1 << 20)), static_cast<int>(rng.below(1 << 20)), side,
                     TileProvenance::poisson};
        const double w = rng.uniform(0.0, side), h = rng.uniform(0.0, side);
        const double x = rng.uniform(0.0, side - w), y = rng.uniform(0.0, side - h);
        const BBox g{t.origin_x + x, t.origin_y + y, t.origin_x + x + w, t.origin_y + y + h,
                     static_cast<int>(rng.below(10)), rng.uniform()};
        const BBox l = remap_to_local(g, t);
        const BBox back = remap_to_global(l, t);
        if (!(back == g) || l.width() != g.width() || l.height() != g.height()) ++bad;
    }
    return {bad == 0, fmt("%d pairs, %d mismatches (bit-exact comparison)", kRemapPairs, bad)};
}

// ------------------------------------------------------------------ 4

std::vector<BBox> nms_instance(Rng& rng, int n, double extent, double min_px, double max_px) {
    std::vector<BBox> out;
    out.reserve(n);
    while (static_cast<int>(out.size()) < n) {
        BBox b = test::random_box(rng, extent, min_px, max_px, 3);
        if (rng.below(3) == 0) b.score = static_cast<double>(rng.below(5)) / 4.0;
        out.push_back(b);
        // Near-duplicates as produced by overlapping tiles and ensembles.
        if (rng.below(2) == 0 && static_cast<int>(out.size()) < n) {
            BBox d = b;
            const double dx = rng.normal() * 2, dy = rng.normal() * 2;
            d.x_min += dx;
            d.x_max += dx;
            d.y_min += dy;
            d.y_max += dy;
            if (rng.below(2) == 0) d.score = rng.uniform();
            if (d.x_min >= 0 && d.y_min >= 0) out.push_back(d);
        }
    }
    return out;
}

bool same(const FusedSet& a, const FusedSet& b) { return a.boxes == b.boxes && a.source_count == b.source_count; }

Outcome nms_equivalence() {
    Rng rng(0x5EED);
    int small_bad = 0, large_bad = 0;
    for (int i = 0; i < kNmsSmallInstances; ++i) {
        const auto boxes = nms_instance(rng, static_cast<int>(rng.below(kNmsSmallMaxBoxes + 1)), 200, 5, 60);
        FusionConfig c;
        c.eiou_rescoring = i % 4 != 0;
        c.class_agnostic = i % 5 == 0;
        c.fuse_coordinates = i % 7 == 0;
        if (!same(eiou_nms(boxes, c), reference_nms(boxes, c))) ++small_bad;
    }
    for (int i = 0; i < kNmsLargeInstances; ++i) {
        const auto boxes = nms_instance(rng, kNmsLargeBoxes, 4000, 8, 80);
        FusionConfig c;
        c.eiou_rescoring = i % 2 == 0;
        if (!same(eiou_nms(boxes, c), reference_nms(boxes, c))) ++large_bad;
    }
    // Timed: 10k global-frame detections from overlapping tiles of a large image.
    const auto timed = nms_instance(rng, kNmsTimedBoxes, 20000, 10, 80);
    DetectorOutput d;
    d.spec.name = "timed";
    DetectionSet s;
    s.frame = Frame::global;
    s.boxes = timed;
    d.sets.push_back(s);
    FusionConfig c;
    c.score_threshold = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    const FusedSet fused = ensemble_merge({d}, c);
    const double secs = seconds_since(t0);
    return {small_bad == 0 && large_bad == 0 && secs < kNmsBudgetSeconds,
            fmt("%d/%d small and %d/%d x %d-box instances differ from the reference; %d boxes fused to %zu in %.3f s "
                "(limit %.1f s)",
                small_bad, kNmsSmallInstances, large_bad, kNmsLargeInstances, kNmsLargeBoxes, kNmsTimedBoxes,
                fused.boxes.size(), secs, kNmsBudgetSeconds)};
}

// ------------------------------------------------------------------ 5

Outcome metric_oracles() {
    Matching m;
    m.pairs.resize(3);
    m.unmatched_detections = {3};
    m.unmatched_ground_truth = {3, 4};
    m.detection_count = 4;
    m.ground_truth_count = 5;
    const EvalReport r = compute_prf1(m);
    const bool prf = r.tp == 3 && r.fp == 1 && r.fn == 2 && r.precision == 0.75 && r.recall == 0.6 &&
                     r.f1 == 2.0 * 0.75 * 0.6 / (0.75 + 0.6) && std::abs(r.f1 - 2.0 / 3.0) <= 1e-15 &&
                     r.accuracy == 0.5;

    const std::vector<BBox> gt = {{0, 0, 10, 10}, {100, 100, 110, 110}};
    const std::vector<BBox> dets = {{0, 0, 10, 10, 0, 0.9}, {50, 50, 60, 60, 0, 0.8}, {100, 100, 110, 110, 0, 0.7}};
    const double ap = average_precision(dets, gt);
    const bool ap_ok = std::abs(ap - 5.0 / 6.0) <= kApTolerance;

    AnnotationSet one;
    one.image_width = one.image_height = 100;
    one.boxes = {{0, 0, 10, 10}};
    const BBox half{0, 0, 10, 5, 0, 0.9};
    const bool boundary = iou(half, one.boxes[0]) == 0.5 && match_detections({half}, one, 0.5).pairs.empty();

    return {prf && ap_ok && boundary,
            fmt("P=%.17g R=%.17g F1=%.17g Acc=%.17g; AP=%.17g (|AP-5/6|=%.2e, tol %.0e); IoU=0.5 excluded: %s",
                r.precision, r.recall, r.f1, r.accuracy, ap, std::abs(ap - 5.0 / 6.0), kApTolerance,
                boundary ? "yes" : "no")};
}

// ------------------------------------------------------------------ 6

SceneSpec small_object_scene() {
    SceneSpec s;
    s.width = 6400;
    s.height = 6400;
    s.objects = 100;
    s.min_px = 20;
    s.max_px = 60;
    s.seed = 2024;
    s.image_id = "acceptance";
    return s;
}

Outcome tiled_vs_whole() {
    const AnnotationSet gt = make_scene_annotations(small_object_scene());
    PipelineConfig c;
    c.seed = 6;
    c.image_id = "acceptance";
    DetectorSpec d;
    d.name = "resolution-limited";
    d.noise = NoiseProfile::realistic(6);
    d.noise.jitter_sigma = 1.0;
    d.noise.spurious_rate = 0.2;
    d.noise.input_side = 640;  // tiles larger than this are downscaled before detection
    d.noise.min_object_px = 12.0;
    c.detectors = {d};
    const auto rows = run_sweep(c, {640}, nullptr, &gt);
    const double whole = rows.at(0).report->recall;
    const double tiled = rows.at(1).report->recall;
    return {tiled >= kTiledRecallMin && whole <= kWholeRecallMax,
            fmt("640-cut recall %.3f (need >= %.2f, %d tiles), whole-image recall %.3f (need <= %.2f); "
                "precision %.3f vs %.3f",
                tiled, kTiledRecallMin, rows[1].tiles, whole, kWholeRecallMax, rows[1].report->precision,
                rows[0].report->precision)};
}

// ------------------------------------------------------------------ 7

Outcome duplicate_elimination() {
    struct Case {
        int side;
        double min_px, max_px;
        int objects;
        std::uint64_t seed;
    };
    const Case cases[] = {{640, 20, 60, 100, 2024}, {640, 20, 200, 150, 7}, {320, 20, 150, 200, 8},
                          {1280, 40, 400, 150, 9}, {640, 20, 60, 400, 10}};
    int objects = 0, dup = 0, missing = 0, extra = 0;
    double worst = 0.0;
    for (const auto& k : cases) {
        SceneSpec s = small_object_scene();
        s.min_px = k.min_px;
        s.max_px = k.max_px;
        s.objects = k.objects;
        s.seed = k.seed;
        const AnnotationSet gt = make_scene_annotations(s);
        PipelineConfig c;
        c.side = k.side;  // radius defaults to side / 2
        c.seed = k.seed;
        c.image_id = "acceptance";
        DetectorSpec d;
        d.name = "identity";
        c.detectors = {d};
        const PipelineResult r = run_pipeline(c, nullptr, &gt);
        objects += static_cast<int>(gt.boxes.size());
        std::vector<int> hits(r.fused.boxes.size(), 0);
        for (const auto& g : gt.boxes) {
            int n = 0;
            double err = 0.0;
            for (std::size_t i = 0; i < r.fused.boxes.size(); ++i) {
                const BBox& f = r.fused.boxes[i];
                if (f.class_id != g.class_id || intersection_area(f, g) <= 0.0) continue;
                ++n;
                ++hits[i];
                err = std::max({std::abs(f.x_min - g.x_min), std::abs(f.y_min - g.y_min), std::abs(f.x_max - g.x_max),
                                std::abs(f.y_max - g.y_max)});
            }
            if (n == 0) ++missing;
            if (n > 1) dup += n - 1;
            if (n >= 1) worst = std::max(worst, err);
        }
        for (int h : hits)
            if (h == 0) ++extra;
    }
    return {dup == 0 && missing == 0 && extra == 0 && worst < kLocalizationMaxPx,
            fmt("%d objects over 5 scenes: %d duplicates, %d missing, %d unmatched outputs, max corner error %.3g px "
                "(limit %.0f px)",
                objects, dup, missing, extra, worst, kLocalizationMaxPx)};
}

// ------------------------------------------------------------------ 8

Outcome mix_ratios() {
    std::vector<LabeledItem> orig, syn;
    for (int i = 0; i < kMixPool; ++i) {
        orig.push_back({"orig/" + std::to_string(i) + ".png", "orig/" + std::to_string(i) + ".txt"});
        syn.push_back({"syn/" + std::to_string(i) + ".png", "syn/" + std::to_string(i) + ".txt"});
    }
    int worst = 0;
    bool deterministic = true;
    std::ostringstream rows;
    for (int pct : {0, 20, 40, 60, 80}) {
        const MixManifest a = mix_datasets(orig, syn, pct, 1234, kMixPool);
        const MixManifest b = mix_datasets(orig, syn, pct, 1234, kMixPool);
        deterministic = deterministic && a.entries == b.entries;
        int o = 0;
        for (const auto& e : a.entries) o += e.origin == ItemOrigin::original ? 1 : 0;
        const int want = kMixPool * pct / 100;
        worst = std::max(worst, std::abs(o - want));
        worst = std::max(worst, std::abs(static_cast<int>(a.entries.size()) - kMixPool));
        rows << pct << "%:" << o << "/" << a.entries.size() - o << " ";
    }
    return {worst <= kMixMaxCountError && deterministic,
            fmt("%smax count error %d (limit %d), deterministic: %s", rows.str().c_str(), worst, kMixMaxCountError,
                deterministic ? "yes" : "no")};
}

// ------------------------------------------------------------------ 9

Outcome parallel_determinism() {
    test::TempDir dir;
    const std::string cli = std::string("'") + LRSAA_CLI_PATH + "'";
    const auto q = [&](const std::string& f) { return test::quote(dir / f); };
    if (test::run_command(cli + " scene --width 4000 --height 3000 --objects 120 --classes 3 --seed 99 --out-image " +
                          q("scene.png") + " --out-gt " + q("gt.json") + " >/dev/null") != 0)
        return {false, "scene generation failed"};

    json cfg = {{"image", "scene.png"},
                {"ground_truth", "gt.json"},
                {"side", 640},
                {"seed", 99},
                {"detectors",
                 {{{"name", "noisy"},
                   {"kind", "synthetic"},
                   {"noise", {{"preset", "realistic"}, {"seed", 3}, {"jitter_sigma", 1.5}, {"spurious_rate", 1.0}}}},
                  {{"name", "bright"}, {"kind", "plugin"}, {"command", {FAKE_PLUGIN_PATH, "bright"}}, {"weight", 0.9}}}},
                {"overlay", true}};
    write_json_file(dir / "run.json", cfg);

    const int pools[] = {1, 4, 16};
    for (int w : pools) {
        const std::string out = "out" + std::to_string(w);
        if (test::run_command(cli + " pipeline --config " + q("run.json") + " --workers " + std::to_string(w) +
                              " --out-dir " + q(out) + " >/dev/null") != 0)
            return {false, "pipeline failed with " + std::to_string(w) + " workers"};
    }

    int files = 0, differing = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir / "out1")) {
        if (!entry.is_regular_file() || entry.path().filename() == "timings.json") continue;
        const auto rel = std::filesystem::relative(entry.path(), dir / "out1");
        const std::string ref = read_text_file(entry.path());
        ++files;
        for (int w : {4, 16}) {
            const auto other = dir / ("out" + std::to_string(w)) / rel;
            if (!std::filesystem::exists(other) || read_text_file(other) != ref) {
                ++differing;
                break;
            }
        }
    }
    return {files > 0 && differing == 0,
            fmt("%d output files compared across 1/4/16 workers (timings.json excluded), %d differ", files, differing)};
}

}  // namespace

int main() {
    report(1, "poisson-min-distance", poisson_min_distance);
    report(2, "coverage-guarantee", coverage_guarantee);
    report(3, "remap-round-trip", remap_round_trip);
    report(4, "nms-oracle-equivalence", nms_equivalence);
    report(5, "metric-oracles", metric_oracles);
    report(6, "tiled-vs-whole-recall", tiled_vs_whole);
    report(7, "duplicate-elimination", duplicate_elimination);
    report(8, "mix-ratios", mix_ratios);
    report(9, "parallel-determinism", parallel_determinism);
    std::printf("%d/9 criteria passed\n", 9 - failures);
    return failures == 0 ? 0 : 1;
}
