#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lrsaa/annotations.hpp"
#include "lrsaa/detector.hpp"
#include "lrsaa/eval.hpp"
#include "lrsaa/formats.hpp"
#include "lrsaa/fusion.hpp"
#include "lrsaa/raster.hpp"
#include "lrsaa/tiling.hpp"

namespace lrsaa {

inline constexpr int kDefaultTileSide = 640;
inline constexpr int kSweepSides[] = {320, 640, 1280};

struct PipelineConfig {
    std::filesystem::path image;         // optional unless a plugin detector is used
    std::filesystem::path ground_truth;  // optional unless a synthetic detector is used
    std::string image_id;
    int image_width = 0;  // only needed when neither image nor gt is given
    int image_height = 0;

    int side = kDefaultTileSide;
    std::optional<double> radius;  // defaults to side / 2
    int k = 30;
    std::uint64_t seed = 0;

    std::vector<DetectorSpec> detectors;
    FusionConfig fusion;
    double match_iou = kDefaultMatchIou;
    ApInterpolation interpolation = ApInterpolation::all_point;

    std::filesystem::path out_dir;
    unsigned workers = 0;  // 0 = logical CPU count
    bool render_overlay = false;

    double effective_radius() const { return radius ? *radius : side / 2.0; }
};

void validate(const PipelineConfig& config);

/// Reads a JSON run configuration. Keys mirror PipelineConfig; missing keys
/// keep their defaults.
PipelineConfig pipeline_config_from_json(const json& j, const std::filesystem::path& base_dir = {});
json pipeline_config_to_json(const PipelineConfig& config);

struct StageTimings {
    double plan_ms = 0.0;
    double tile_ms = 0.0;
    double detect_ms = 0.0;
    double fuse_ms = 0.0;
    double eval_ms = 0.0;
};

struct PipelineResult {
    std::string image_id;
    TilePlan plan;
    int rasters_extracted = 0;
    int plugin_requests = 0;
    std::vector<DetectionSet> detections;  // global frame, detector-major, tile order
    int detections_before_fusion = 0;
    FusedSet fused;
    std::optional<EvalReport> report;
    StageTimings timings;
};

/// plan -> tile -> detect -> fuse (-> eval when ground truth is available).
///
/// `image` and `gt` override the paths in the config when non-null. Tile
/// rasters are written under out_dir/tiles when out_dir is set (and to a
/// temporary directory otherwise, if a plugin needs them).
PipelineResult run_pipeline(const PipelineConfig& config, const ImageRaster* image = nullptr,
                            const AnnotationSet* gt = nullptr);

/// Writes plan.json, detections.jsonl, fused.json, fused.txt (YOLO),
/// eval.json (when evaluated), summary.json, timings.json and optionally
/// overlay.png into config.out_dir. Everything except timings.json is a pure
/// function of the inputs and seed.
void write_pipeline_outputs(const PipelineConfig& config, const PipelineResult& result,
                            const ImageRaster* image = nullptr);

json summary_to_json(const PipelineConfig& config, const PipelineResult& result);

struct SweepRow {
    std::string label;  // "whole" or "<side>-cut"
    int side = 0;
    int tiles = 0;
    int detections_before_fusion = 0;
    int detections_after_fusion = 0;
    std::optional<EvalReport> report;
};

/// Runs the pipeline once on the whole image (side = max(width, height)) and
/// once per entry of `sides`.
std::vector<SweepRow> run_sweep(const PipelineConfig& config, const std::vector<int>& sides,
                                const ImageRaster* image = nullptr, const AnnotationSet* gt = nullptr);

std::string format_sweep_table(const std::vector<SweepRow>& rows);
json sweep_to_json(const std::vector<SweepRow>& rows);

/// Draws class-coloured box outlines on an RGB copy of `image`.
ImageRaster render_overlay(const ImageRaster& image, const std::vector<BBox>& boxes, int thickness = 2);

}  // namespace lrsaa
