#include <doctest.h>

#include "lrsaa/error.hpp"
#include "lrsaa/formats.hpp"
#include "lrsaa/pipeline.hpp"
#include "lrsaa/scene.hpp"
#include "support.hpp"

using namespace lrsaa;

namespace {

PipelineConfig identity_config(int side) {
    PipelineConfig c;
    c.side = side;
    c.seed = 5;
    c.image_id = "scene";
    DetectorSpec d;
    d.name = "synthetic";
    c.detectors = {d};
    return c;
}

}  // namespace

TEST_CASE("scene annotations") {
    SceneSpec spec;
    spec.width = 2000;
    spec.height = 1500;
    spec.objects = 60;
    spec.classes = 3;
    spec.seed = 1;
    const AnnotationSet gt = make_scene_annotations(spec);
    REQUIRE(gt.boxes.size() == 60);
    for (std::size_t i = 0; i < gt.boxes.size(); ++i) {
        const BBox& b = gt.boxes[i];
        CHECK(b.x_min >= 0);
        CHECK(b.x_max <= 2000);
        CHECK(b.y_max <= 1500);
        CHECK(b.width() >= 20);
        CHECK(b.width() <= 60);
        CHECK(b.class_id < 3);
        for (std::size_t j = i + 1; j < gt.boxes.size(); ++j) CHECK(intersection_area(b, gt.boxes[j]) == 0.0);
    }
    CHECK(make_scene_annotations(spec).boxes == gt.boxes);
}

TEST_CASE("identity pipeline recovers every object") {
    SceneSpec spec;
    spec.width = 3000;
    spec.height = 2500;
    spec.objects = 80;
    spec.seed = 2;
    const AnnotationSet gt = make_scene_annotations(spec);
    const PipelineResult r = run_pipeline(identity_config(640), nullptr, &gt);
    REQUIRE(r.report);
    CHECK(r.report->recall == 1.0);
    CHECK(r.report->precision == 1.0);
    CHECK(r.fused.boxes.size() == gt.boxes.size());
    CHECK(r.plan.coverage_fraction == 1.0);
    CHECK(r.detections_before_fusion >= static_cast<int>(gt.boxes.size()));
}

TEST_CASE("pipeline results do not depend on the worker count") {
    SceneSpec spec;
    spec.width = 2000;
    spec.height = 2000;
    spec.objects = 50;
    spec.seed = 3;
    const AnnotationSet gt = make_scene_annotations(spec);
    PipelineConfig c = identity_config(320);
    c.detectors[0].noise = NoiseProfile::realistic(4);
    c.detectors[0].noise.jitter_sigma = 1.5;
    c.detectors[0].noise.spurious_rate = 0.5;
    c.workers = 1;
    const PipelineResult a = run_pipeline(c, nullptr, &gt);
    c.workers = 7;
    const PipelineResult b = run_pipeline(c, nullptr, &gt);
    CHECK(a.fused.boxes == b.fused.boxes);
    CHECK(a.detections == b.detections);
}

TEST_CASE("pipeline outputs on disk") {
    test::TempDir dir;
    SceneSpec spec;
    spec.width = 800;
    spec.height = 700;
    spec.objects = 10;
    spec.seed = 4;
    const AnnotationSet gt = make_scene_annotations(spec);
    const ImageRaster img = render_scene(spec, gt);
    PipelineConfig c = identity_config(320);
    c.out_dir = dir.path;
    c.render_overlay = true;
    const PipelineResult r = run_pipeline(c, &img, &gt);
    write_pipeline_outputs(c, r, &img);
    for (const char* f : {"plan.json", "detections.jsonl", "fused.json", "fused.txt", "eval.json", "summary.json",
                          "timings.json", "overlay.png"})
        CHECK(std::filesystem::exists(dir / f));
    CHECK(r.rasters_extracted == static_cast<int>(r.plan.tiles.size()));
    const json summary = read_json_file(dir / "summary.json");
    CHECK(summary.at("image") == "scene");
    CHECK(read_json_file(dir / "eval.json").at("recall") == 1.0);
}

TEST_CASE("plugin detector inside the pipeline") {
    test::TempDir dir;
    SceneSpec spec;
    spec.width = 900;
    spec.height = 900;
    spec.objects = 15;
    spec.classes = 2;
    spec.seed = 8;
    const AnnotationSet gt = make_scene_annotations(spec);
    const ImageRaster img = render_scene(spec, gt);
    PipelineConfig c;
    c.side = 320;
    c.seed = 1;
    c.out_dir = dir.path;
    DetectorSpec d;
    d.name = "bright";
    d.kind = DetectorKind::plugin;
    d.command = {FAKE_PLUGIN_PATH, "bright"};
    c.detectors = {d};
    const PipelineResult r = run_pipeline(c, &img, &gt);
    CHECK(r.plugin_requests == static_cast<int>(r.plan.tiles.size()));
    REQUIRE(r.report);
    CHECK(r.report->recall == 1.0);
    CHECK(r.report->precision == 1.0);
}

TEST_CASE("sweep runs whole image plus each side") {
    SceneSpec spec;
    spec.width = 1500;
    spec.height = 1300;
    spec.objects = 20;
    spec.seed = 6;
    const AnnotationSet gt = make_scene_annotations(spec);
    const auto rows = run_sweep(identity_config(640), {320, 640}, nullptr, &gt);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].label == "whole");
    CHECK(rows[0].tiles == 1);
    CHECK(rows[1].side == 320);
    CHECK(format_sweep_table(rows).find("640-cut") != std::string::npos);
}

TEST_CASE("pipeline validation") {
    PipelineConfig c;
    CHECK_THROWS_AS(validate(c), ValidationError);
    c = identity_config(0);
    CHECK_THROWS_AS(validate(c), ValidationError);
}
