#include "lrsaa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

#include <unistd.h>

#include "lrsaa/error.hpp"
#include "lrsaa/parallel.hpp"
#include "lrsaa/rng.hpp"
#include "lrsaa/synthgen.hpp"

namespace lrsaa {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string tile_file_name(int tile_id) {
    char name[32];
    std::snprintf(name, sizeof name, "tile_%05d.png", tile_id);
    return name;
}

// Removes a scratch directory on scope exit.
struct ScratchDir {
    std::filesystem::path path;
    ~ScratchDir() {
        if (path.empty()) return;
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

std::filesystem::path make_scratch_dir() {
    static std::atomic<unsigned> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("lrsaa-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

}  // namespace

void validate(const PipelineConfig& c) {
    if (c.side < 1) throw ValidationError("config: tile side must be a positive integer");
    if (c.radius && !(*c.radius > 0.0)) throw ValidationError("config: poisson radius must be positive");
    if (c.k < 1) throw ValidationError("config: k must be >= 1");
    if (c.detectors.empty()) throw ValidationError("config: at least one detector is required");
    std::set<std::string> names;
    for (const auto& d : c.detectors) {
        validate(d);
        if (!names.insert(d.name).second) throw ValidationError("config: duplicate detector name '" + d.name + "'");
    }
    validate(c.fusion);
    if (!(c.match_iou >= 0.0 && c.match_iou <= 1.0)) throw ValidationError("config: match IoU must be in [0,1]");
    if (!c.image.empty() && !std::filesystem::exists(c.image))
        throw ValidationError("config: image '" + c.image.string() + "' does not exist");
    if (!c.ground_truth.empty() && !std::filesystem::exists(c.ground_truth))
        throw ValidationError("config: ground truth '" + c.ground_truth.string() + "' does not exist");
}

PipelineConfig pipeline_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ValidationError("config: expected a JSON object");
    PipelineConfig c;
    try {
        if (j.contains("image")) c.image = resolve(j.at("image").get<std::string>(), base_dir);
        if (j.contains("ground_truth")) c.ground_truth = resolve(j.at("ground_truth").get<std::string>(), base_dir);
        c.image_id = j.value("image_id", c.image_id);
        c.image_width = j.value("width", c.image_width);
        c.image_height = j.value("height", c.image_height);
        c.side = j.value("side", c.side);
        if (j.contains("radius") && !j.at("radius").is_null()) c.radius = j.at("radius").get<double>();
        c.k = j.value("k", c.k);
        c.seed = j.value("seed", c.seed);
        if (j.contains("detectors"))
            for (const auto& d : j.at("detectors")) c.detectors.push_back(detector_spec_from_json(d));
        if (j.contains("fusion")) c.fusion = fusion_config_from_json(j.at("fusion"));
        if (j.contains("eval")) {
            const auto& e = j.at("eval");
            c.match_iou = e.value("iou", c.match_iou);
            const std::string interp = e.value("interpolation", std::string("all-point"));
            if (interp == "all-point") c.interpolation = ApInterpolation::all_point;
            else if (interp == "11-point") c.interpolation = ApInterpolation::eleven_point;
            else throw ValidationError("config: eval.interpolation must be 'all-point' or '11-point'");
        }
        if (j.contains("out_dir")) c.out_dir = resolve(j.at("out_dir").get<std::string>(), base_dir);
        c.workers = j.value("workers", c.workers);
        c.render_overlay = j.value("overlay", c.render_overlay);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    return c;
}

json pipeline_config_to_json(const PipelineConfig& c) {
    json dets = json::array();
    for (const auto& d : c.detectors) dets.push_back(detector_spec_to_json(d));
    json j = {{"image_id", c.image_id},
              {"side", c.side},
              {"radius", c.effective_radius()},
              {"k", c.k},
              {"seed", c.seed},
              {"detectors", dets},
              {"fusion", fusion_config_to_json(c.fusion)},
              {"eval",
               {{"iou", c.match_iou},
                {"interpolation", c.interpolation == ApInterpolation::all_point ? "all-point" : "11-point"}}}};
    if (!c.image.empty()) j["image"] = c.image.string();
    if (!c.ground_truth.empty()) j["ground_truth"] = c.ground_truth.string();
    return j;
}

PipelineResult run_pipeline(const PipelineConfig& config, const ImageRaster* image, const AnnotationSet* gt) {
    validate(config);

    ImageRaster loaded_image;
    if (!image && !config.image.empty()) {
        loaded_image = read_raster(config.image);
        image = &loaded_image;
    }
    AnnotationSet loaded_gt;
    if (!gt && !config.ground_truth.empty()) {
        loaded_gt = annotations_from_json(read_json_file(config.ground_truth));
        normalize_annotations(loaded_gt);
        gt = &loaded_gt;
    }

    const bool has_plugin = std::any_of(config.detectors.begin(), config.detectors.end(),
                                        [](const DetectorSpec& d) { return d.kind == DetectorKind::plugin; });
    const bool has_synthetic = std::any_of(config.detectors.begin(), config.detectors.end(),
                                           [](const DetectorSpec& d) { return d.kind == DetectorKind::synthetic; });
    if (has_plugin && !image) throw ValidationError("pipeline: plugin detectors need an input image");
    if (has_synthetic && !gt) throw ValidationError("pipeline: synthetic detectors need ground truth");

    int width = config.image_width, height = config.image_height;
    if (gt) {
        width = gt->image_width;
        height = gt->image_height;
    }
    if (image) {
        if (gt && (image->width != gt->image_width || image->height != gt->image_height))
            throw ValidationError("pipeline: image and ground truth dimensions differ");
        width = image->width;
        height = image->height;
    }
    if (width < 1 || height < 1) throw ValidationError("pipeline: image dimensions unknown");

    std::string image_id = config.image_id;
    if (image_id.empty() && gt) image_id = gt->image_id;
    if (image_id.empty() && !config.image.empty()) image_id = config.image.stem().string();

    const unsigned workers = config.workers == 0 ? default_worker_count() : config.workers;
    PipelineResult result;
    result.image_id = image_id;

    auto t0 = Clock::now();
    result.plan = plan_tiles(width, height, config.side, config.effective_radius(), config.k,
                             derive_image_seed(config.seed, image_id));
    result.timings.plan_ms = ms_since(t0);
    const auto& tiles = result.plan.tiles;

    t0 = Clock::now();
    ScratchDir scratch;
    std::filesystem::path tiles_dir;
    if (image && (!config.out_dir.empty() || has_plugin)) {
        if (!config.out_dir.empty()) {
            tiles_dir = config.out_dir / "tiles";
            std::error_code ec;
            std::filesystem::remove_all(tiles_dir, ec);
            std::filesystem::create_directories(tiles_dir);
        } else {
            scratch.path = make_scratch_dir();
            tiles_dir = scratch.path;
        }
        parallel_for(tiles.size(), workers, [&](std::size_t i) {
            write_png(tiles_dir / tile_file_name(tiles[i].tile_id), extract_tile(*image, tiles[i]));
        });
        result.rasters_extracted = static_cast<int>(tiles.size());
    }
    result.timings.tile_ms = ms_since(t0);

    t0 = Clock::now();
    std::vector<DetectorOutput> outputs;
    for (const auto& spec : config.detectors) {
        std::vector<DetectionSet> sets(tiles.size());
        if (spec.kind == DetectorKind::plugin) {
            std::vector<TileRequest> requests;
            requests.reserve(tiles.size());
            for (const auto& t : tiles) requests.push_back({t.tile_id, t.side, tiles_dir / tile_file_name(t.tile_id)});
            sets = run_plugin(spec, requests);
            result.plugin_requests += static_cast<int>(requests.size());
        } else {
            parallel_for(tiles.size(), workers,
                         [&](std::size_t i) { sets[i] = synthetic_detect(*gt, tiles[i], spec.noise, spec.name); });
        }
        for (std::size_t i = 0; i < sets.size(); ++i) {
            check_local_bounds(sets[i], tiles[i].side);
            for (auto& b : sets[i].boxes) b = remap_to_global(b, tiles[i]);
            sets[i].frame = Frame::global;
            result.detections_before_fusion += static_cast<int>(sets[i].boxes.size());
        }
        result.detections.insert(result.detections.end(), sets.begin(), sets.end());
        outputs.push_back({spec, std::move(sets)});
    }
    result.timings.detect_ms = ms_since(t0);

    t0 = Clock::now();
    result.fused = ensemble_merge(outputs, config.fusion, &result.plan);
    result.timings.fuse_ms = ms_since(t0);

    if (gt) {
        t0 = Clock::now();
        result.report = evaluate(result.fused.boxes, *gt, config.match_iou, config.interpolation);
        result.timings.eval_ms = ms_since(t0);
    }
    return result;
}

json summary_to_json(const PipelineConfig& config, const PipelineResult& r) {
    int poisson = 0, fallback = 0;
    for (const auto& t : r.plan.tiles) (t.provenance == TileProvenance::poisson ? poisson : fallback)++;
    json per_detector = json::object();
    for (const auto& s : r.detections) {
        auto& slot = per_detector[s.detector_name];
        slot = slot.is_null() ? json(s.boxes.size()) : json(slot.get<std::size_t>() + s.boxes.size());
    }
    json j = {{"image", r.image_id},
              {"image_width", r.plan.image_width},
              {"image_height", r.plan.image_height},
              {"side", r.plan.side},
              {"r", r.plan.r},
              {"seed", r.plan.seed},
              {"tiles", r.plan.tiles.size()},
              {"poisson_tiles", poisson},
              {"fallback_tiles", fallback},
              {"coverage_fraction", r.plan.coverage_fraction},
              {"rasters_extracted", r.rasters_extracted},
              {"plugin_requests", r.plugin_requests},
              {"detections_before_fusion", r.detections_before_fusion},
              {"detections_per_detector", per_detector},
              {"detections_after_fusion", r.fused.boxes.size()},
              {"config", pipeline_config_to_json(config)}};
    if (r.report) j["eval"] = report_to_json(*r.report);
    return j;
}

void write_pipeline_outputs(const PipelineConfig& config, const PipelineResult& r, const ImageRaster* image) {
    if (config.out_dir.empty()) throw ValidationError("pipeline: no output directory");
    const auto& dir = config.out_dir;
    std::filesystem::create_directories(dir);
    write_json_file(dir / "plan.json", plan_to_json(r.plan));
    write_text_file(dir / "detections.jsonl", detection_sets_to_jsonl(r.detections));
    write_json_file(dir / "fused.json", fused_to_json(r.image_id, r.fused));
    write_text_file(dir / "fused.txt", to_yolo(r.fused.boxes, r.plan.image_width, r.plan.image_height));
    if (r.report) write_json_file(dir / "eval.json", report_to_json(*r.report));
    write_json_file(dir / "summary.json", summary_to_json(config, r));
    write_json_file(dir / "timings.json", {{"plan_ms", r.timings.plan_ms},
                                           {"tile_ms", r.timings.tile_ms},
                                           {"detect_ms", r.timings.detect_ms},
                                           {"fuse_ms", r.timings.fuse_ms},
                                           {"eval_ms", r.timings.eval_ms}});
    if (config.render_overlay) {
        ImageRaster loaded;
        if (!image && !config.image.empty()) {
            loaded = read_raster(config.image);
            image = &loaded;
        }
        if (!image) throw ValidationError("pipeline: overlay rendering needs an input image");
        write_png(dir / "overlay.png", render_overlay(*image, r.fused.boxes));
    }
}

std::vector<SweepRow> run_sweep(const PipelineConfig& config, const std::vector<int>& sides, const ImageRaster* image,
                                const AnnotationSet* gt) {
    ImageRaster loaded_image;
    if (!image && !config.image.empty()) {
        loaded_image = read_raster(config.image);
        image = &loaded_image;
    }
    AnnotationSet loaded_gt;
    if (!gt && !config.ground_truth.empty()) {
        loaded_gt = annotations_from_json(read_json_file(config.ground_truth));
        normalize_annotations(loaded_gt);
        gt = &loaded_gt;
    }
    int width = config.image_width, height = config.image_height;
    if (gt) {
        width = gt->image_width;
        height = gt->image_height;
    }
    if (image) {
        width = image->width;
        height = image->height;
    }
    if (width < 1 || height < 1) throw ValidationError("sweep: image dimensions unknown");

    std::vector<std::pair<std::string, int>> runs{{"whole", std::max(width, height)}};
    for (int s : sides) runs.emplace_back(std::to_string(s) + "-cut", s);

    std::vector<SweepRow> rows;
    for (const auto& [label, side] : runs) {
        PipelineConfig c = config;
        c.side = side;
        c.radius.reset();
        c.render_overlay = false;
        c.image_width = width;
        c.image_height = height;
        if (!config.out_dir.empty()) c.out_dir = config.out_dir / label;
        const PipelineResult r = run_pipeline(c, image, gt);
        if (!c.out_dir.empty()) write_pipeline_outputs(c, r, image);
        rows.push_back({label, side, static_cast<int>(r.plan.tiles.size()), r.detections_before_fusion,
                        static_cast<int>(r.fused.boxes.size()), r.report});
    }
    return rows;
}

std::string format_sweep_table(const std::vector<SweepRow>& rows) {
    std::string out;
    char line[200];
    std::snprintf(line, sizeof line, "%-10s %6s %7s %9s %8s %9s %7s %7s %7s\n", "run", "side", "tiles", "raw dets",
                  "fused", "accuracy", "f1", "recall", "mAP");
    out += line;
    for (const auto& r : rows) {
        if (r.report) {
            std::snprintf(line, sizeof line, "%-10s %6d %7d %9d %8d %9.3f %7.3f %7.3f %7s\n", r.label.c_str(), r.side,
                          r.tiles, r.detections_before_fusion, r.detections_after_fusion, r.report->accuracy,
                          r.report->f1, r.report->recall,
                          r.report->map ? std::to_string(*r.report->map).substr(0, 5).c_str() : "n/a");
        } else {
            std::snprintf(line, sizeof line, "%-10s %6d %7d %9d %8d %9s %7s %7s %7s\n", r.label.c_str(), r.side,
                          r.tiles, r.detections_before_fusion, r.detections_after_fusion, "-", "-", "-", "-");
        }
        out += line;
    }
    return out;
}

json sweep_to_json(const std::vector<SweepRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        json j = {{"run", r.label},
                  {"side", r.side},
                  {"tiles", r.tiles},
                  {"detections_before_fusion", r.detections_before_fusion},
                  {"detections_after_fusion", r.detections_after_fusion}};
        if (r.report) j["eval"] = report_to_json(*r.report);
        arr.push_back(std::move(j));
    }
    return arr;
}

ImageRaster render_overlay(const ImageRaster& image, const std::vector<BBox>& boxes, int thickness) {
    ImageRaster out(image.width, image.height, 3);
    for (int y = 0; y < image.height; ++y) {
        const std::uint8_t* src = image.row(y);
        std::uint8_t* dst = out.row(y);
        for (int x = 0; x < image.width; ++x) {
            const std::uint8_t* px = src + static_cast<std::size_t>(x) * image.channels;
            if (image.channels >= 3) {
                dst[3 * x] = px[0];
                dst[3 * x + 1] = px[1];
                dst[3 * x + 2] = px[2];
            } else {
                dst[3 * x] = dst[3 * x + 1] = dst[3 * x + 2] = px[0];
            }
        }
    }

    static constexpr std::uint8_t palette[][3] = {{230, 25, 75},  {60, 180, 75},  {255, 225, 25}, {0, 130, 200},
                                                  {245, 130, 48}, {145, 30, 180}, {70, 240, 240}, {240, 50, 230}};
    constexpr int palette_size = sizeof palette / sizeof palette[0];
    auto fill = [&](int x0, int y0, int x1, int y1, const std::uint8_t* c) {
        x0 = std::max(x0, 0);
        y0 = std::max(y0, 0);
        x1 = std::min(x1, out.width);
        y1 = std::min(y1, out.height);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                std::uint8_t* p = out.row(y) + 3 * static_cast<std::size_t>(x);
                p[0] = c[0];
                p[1] = c[1];
                p[2] = c[2];
            }
    };
    for (const auto& b : boxes) {
        const auto* c = palette[b.class_id % palette_size];
        const int x0 = static_cast<int>(std::floor(b.x_min)), y0 = static_cast<int>(std::floor(b.y_min));
        const int x1 = static_cast<int>(std::ceil(b.x_max)), y1 = static_cast<int>(std::ceil(b.y_max));
        fill(x0, y0, x1, y0 + thickness, c);
        fill(x0, y1 - thickness, x1, y1, c);
        fill(x0, y0, x0 + thickness, y1, c);
        fill(x1 - thickness, y0, x1, y1, c);
    }
    return out;
}

}  // namespace lrsaa
