// Command-line front end: plan, tile, detect, fuse, eval, synth, pipeline, scene.
//
// Exit status: 0 ok, 2 invalid configuration or arguments, 3 plugin or
// protocol failure, 4 I/O failure, 1 anything else.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "lrsaa/error.hpp"
#include "lrsaa/formats.hpp"
#include "lrsaa/parallel.hpp"
#include "lrsaa/pipeline.hpp"
#include "lrsaa/rng.hpp"
#include "lrsaa/scene.hpp"
#include "lrsaa/synthgen.hpp"

namespace fs = std::filesystem;
using namespace lrsaa;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitPlugin = 3;
constexpr int kExitIo = 4;

struct FusionFlags {
    std::optional<double> score_threshold;
    std::optional<double> suppression_iou;
    bool class_agnostic = false;
    bool fuse_coordinates = false;
    bool no_eiou_rescoring = false;
    std::optional<double> border_margin;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--score-threshold", score_threshold, "Discard fused inputs scoring below this (default 0.25)");
        cmd->add_option("--suppression-iou", suppression_iou, "NMS removal threshold on IoU (default 0.5)");
        cmd->add_flag("--class-agnostic", class_agnostic, "Suppress across classes");
        cmd->add_flag("--fuse-coordinates", fuse_coordinates, "Replace keepers by the score-weighted cluster mean");
        cmd->add_flag("--no-eiou-rescoring", no_eiou_rescoring, "Break score ties by position only");
        cmd->add_option("--border-margin", border_margin, "Tile-edge truncation margin in px (negative disables)");
    }

    void apply(FusionConfig& c) const {
        if (score_threshold) c.score_threshold = *score_threshold;
        if (suppression_iou) c.suppression_iou = *suppression_iou;
        if (class_agnostic) c.class_agnostic = true;
        if (fuse_coordinates) c.fuse_coordinates = true;
        if (no_eiou_rescoring) c.eiou_rescoring = false;
        if (border_margin) c.border_margin = *border_margin;
        validate(c);
    }
};

PipelineConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    const fs::path p(path);
    return pipeline_config_from_json(read_json_file(p), p.parent_path());
}

AnnotationSet load_annotations(const fs::path& path) {
    AnnotationSet gt = annotations_from_json(read_json_file(path));
    normalize_annotations(gt);
    return gt;
}

ApInterpolation parse_interpolation(const std::string& s) {
    if (s == "all-point") return ApInterpolation::all_point;
    if (s == "11-point") return ApInterpolation::eleven_point;
    throw ValidationError("--ap must be 'all-point' or '11-point'");
}

std::string tile_file_name(int tile_id) {
    char name[32];
    std::snprintf(name, sizeof name, "tile_%05d.png", tile_id);
    return name;
}

// ---------------------------------------------------------------- plan

struct PlanArgs {
    std::string image, out, points, image_id;
    int width = 0, height = 0, side = kDefaultTileSide, k = kDefaultPoissonAttempts;
    std::optional<double> radius;
    std::uint64_t seed = 0;
};

int cmd_plan(const PlanArgs& a) {
    int w = a.width, h = a.height;
    std::string image_id = a.image_id;
    if (!a.image.empty()) {
        const auto header = read_raster_header(a.image);
        w = header.width;
        h = header.height;
        if (image_id.empty()) image_id = fs::path(a.image).stem().string();
    }
    if (w < 1 || h < 1) throw ValidationError("plan: give --image or positive --width/--height");
    const double r = a.radius ? *a.radius : a.side / 2.0;
    const auto result = plan_tiles_with_points(w, h, a.side, r, a.k, derive_image_seed(a.seed, image_id));
    write_json_file(a.out, plan_to_json(result.plan));
    if (!a.points.empty()) write_text_file(a.points, points_to_jsonl(result.points));
    std::cout << "planned " << result.plan.tiles.size() << " tiles (" << result.points.size()
              << " poisson points) over " << w << "x" << h << ", coverage " << result.plan.coverage_fraction << "\n";
    return 0;
}

// ---------------------------------------------------------------- tile

struct TileArgs {
    std::string image, plan, out_dir;
    unsigned workers = 0;
};

int cmd_tile(const TileArgs& a) {
    const TilePlan plan = plan_from_json(read_json_file(a.plan));
    const ImageRaster image = read_raster(a.image);
    if (image.width != plan.image_width || image.height != plan.image_height)
        throw ValidationError("tile: image size does not match the plan");
    fs::create_directories(a.out_dir);
    parallel_for(plan.tiles.size(), a.workers, [&](std::size_t i) {
        const Tile& t = plan.tiles[i];
        write_png(fs::path(a.out_dir) / tile_file_name(t.tile_id), extract_tile(image, t));
    });
    std::cout << "extracted " << plan.tiles.size() << " tiles into " << a.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------- detect

struct DetectArgs {
    std::string plan, config, tiles_dir, gt, out, frame = "global";
    std::vector<std::string> detector_files;
    unsigned workers = 0;
};

int cmd_detect(const DetectArgs& a) {
    const TilePlan plan = plan_from_json(read_json_file(a.plan));
    std::vector<DetectorSpec> specs = load_config(a.config).detectors;
    for (const auto& f : a.detector_files) specs.push_back(detector_spec_from_json(read_json_file(f)));
    if (specs.empty()) throw ValidationError("detect: no detectors (use --config or --detector)");
    if (a.frame != "global" && a.frame != "local") throw ValidationError("detect: --frame must be global or local");

    std::optional<AnnotationSet> gt;
    if (!a.gt.empty()) gt = load_annotations(a.gt);

    std::vector<DetectionSet> all;
    for (const auto& spec : specs) {
        std::vector<DetectionSet> sets(plan.tiles.size());
        if (spec.kind == DetectorKind::plugin) {
            if (a.tiles_dir.empty()) throw ValidationError("detect: plugin detectors need --tiles-dir");
            std::vector<TileRequest> requests;
            for (const auto& t : plan.tiles) {
                const fs::path raster = fs::path(a.tiles_dir) / tile_file_name(t.tile_id);
                if (!fs::exists(raster)) throw IoError("detect: missing tile raster '" + raster.string() + "'");
                requests.push_back({t.tile_id, t.side, fs::absolute(raster)});
            }
            sets = run_plugin(spec, requests);
        } else {
            if (!gt) throw ValidationError("detect: synthetic detector '" + spec.name + "' needs --gt");
            parallel_for(plan.tiles.size(), a.workers, [&](std::size_t i) {
                sets[i] = synthetic_detect(*gt, plan.tiles[i], spec.noise, spec.name);
            });
        }
        for (std::size_t i = 0; i < sets.size(); ++i) {
            check_local_bounds(sets[i], plan.tiles[i].side);
            if (a.frame == "global") {
                for (auto& b : sets[i].boxes) b = remap_to_global(b, plan.tiles[i]);
                sets[i].frame = Frame::global;
            }
        }
        all.insert(all.end(), sets.begin(), sets.end());
    }
    write_text_file(a.out, detection_sets_to_jsonl(all));
    std::size_t n = 0;
    for (const auto& s : all) n += s.boxes.size();
    std::cout << "wrote " << n << " detections from " << specs.size() << " detector(s) over " << plan.tiles.size()
              << " tiles\n";
    return 0;
}

// ---------------------------------------------------------------- fuse

struct FuseArgs {
    std::string dets, plan, config, out, yolo, overlay, image, image_id;
    FusionFlags flags;
};

int cmd_fuse(const FuseArgs& a) {
    const PipelineConfig cfg = load_config(a.config);
    FusionConfig fusion = cfg.fusion;
    a.flags.apply(fusion);

    std::map<std::string, DetectorSpec> specs;
    for (const auto& d : cfg.detectors) specs[d.name] = d;

    std::vector<DetectorOutput> outputs;
    std::map<std::string, std::size_t> slot;
    for (auto& set : detection_sets_from_jsonl(read_text_file(a.dets))) {
        auto [it, fresh] = slot.emplace(set.detector_name, outputs.size());
        if (fresh) {
            DetectorSpec spec;
            spec.name = set.detector_name;
            if (auto s = specs.find(set.detector_name); s != specs.end()) spec = s->second;
            outputs.push_back({spec, {}});
        }
        outputs[it->second].sets.push_back(std::move(set));
    }

    std::optional<TilePlan> plan;
    if (!a.plan.empty()) plan = plan_from_json(read_json_file(a.plan));
    const FusedSet fused = ensemble_merge(outputs, fusion, plan ? &*plan : nullptr);

    write_json_file(a.out, fused_to_json(a.image_id, fused));
    if (!a.yolo.empty()) {
        if (!plan) throw ValidationError("fuse: --yolo needs --plan for the image size");
        write_text_file(a.yolo, to_yolo(fused.boxes, plan->image_width, plan->image_height));
    }
    if (!a.overlay.empty()) {
        if (a.image.empty()) throw ValidationError("fuse: --overlay needs --image");
        write_png(a.overlay, render_overlay(read_raster(a.image), fused.boxes));
    }
    std::cout << "fused " << fused.boxes.size() << " boxes\n";
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string gt, dets, out, ap = "all-point";
    double iou = kDefaultMatchIou;
};

int cmd_eval(const EvalArgs& a) {
    const AnnotationSet gt = load_annotations(a.gt);
    const FusedSet dets = fused_from_json(read_json_file(a.dets));
    const EvalReport report = evaluate(dets.boxes, gt, a.iou, parse_interpolation(a.ap));
    if (!a.out.empty()) write_json_file(a.out, report_to_json(report));
    std::cout << format_report_table(report, gt.classes);
    return 0;
}

// ---------------------------------------------------------------- synth

struct CropArgs {
    std::string image, gt, out_dir;
    int side = 640, count = 1;
    std::uint64_t seed = 0;
    double visibility = 0.25;
};

int cmd_synth_crops(const CropArgs& a) {
    const ImageRaster image = read_raster(a.image);
    const AnnotationSet gt = load_annotations(a.gt);
    const auto crops = sample_crops(image, gt, a.side, a.count, a.seed, a.visibility);
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    std::vector<std::string> items(crops.size());
    parallel_for(crops.size(), 0, [&](std::size_t i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "crop_%05zu", i);
        const fs::path png = dir / (std::string(stem) + ".png");
        const fs::path txt = dir / (std::string(stem) + ".txt");
        write_png(png, crops[i].raster);
        write_yolo_labels(txt, crops[i].labels.boxes, a.side, a.side);
        items[i] = json{{"raster", png.string()}, {"labels", txt.string()},
                        {"origin_x", crops[i].origin_x}, {"origin_y", crops[i].origin_y}}.dump();
    });
    std::string listing;
    for (const auto& line : items) listing += line + "\n";
    write_text_file(dir / "items.jsonl", listing);
    std::cout << "wrote " << crops.size() << " crops to " << a.out_dir << "\n";
    return 0;
}

struct MixArgs {
    std::string original, synthetic, out;
    double ratio = 100.0;
    int size = -1;
    std::uint64_t seed = 0;
};

int cmd_synth_mix(const MixArgs& a) {
    const auto original = a.original.empty() ? std::vector<LabeledItem>{}
                                             : labeled_items_from_jsonl(read_text_file(a.original));
    const auto synthetic = a.synthetic.empty() ? std::vector<LabeledItem>{}
                                               : labeled_items_from_jsonl(read_text_file(a.synthetic));
    const MixManifest m = mix_datasets(original, synthetic, a.ratio, a.seed, a.size);
    write_text_file(a.out, manifest_to_jsonl(m));
    std::cout << "manifest: " << m.original_count << " original + " << m.synthetic_count << " synthetic\n";
    return 0;
}

// ---------------------------------------------------------------- pipeline

struct PipelineArgs {
    std::string config, image, gt, out_dir, image_id;
    std::optional<int> side, k;
    std::optional<double> radius, match_iou;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    bool overlay = false;
    bool sweep = false;
    FusionFlags flags;
};

int cmd_pipeline(const PipelineArgs& a) {
    PipelineConfig c = load_config(a.config);
    if (!a.image.empty()) c.image = a.image;
    if (!a.gt.empty()) c.ground_truth = a.gt;
    if (!a.out_dir.empty()) c.out_dir = a.out_dir;
    if (!a.image_id.empty()) c.image_id = a.image_id;
    if (a.side) c.side = *a.side;
    if (a.k) c.k = *a.k;
    if (a.radius) c.radius = *a.radius;
    if (a.match_iou) c.match_iou = *a.match_iou;
    if (a.seed) c.seed = *a.seed;
    if (a.workers) c.workers = *a.workers;
    if (a.overlay) c.render_overlay = true;
    a.flags.apply(c.fusion);
    if (c.out_dir.empty()) throw ValidationError("pipeline: --out-dir (or out_dir in the config) is required");
    // Without configured detectors, ground truth drives an identity synthetic detector.
    if (c.detectors.empty() && !c.ground_truth.empty()) {
        DetectorSpec d;
        d.name = "synthetic";
        c.detectors.push_back(d);
    }
    validate(c);

    if (a.sweep) {
        std::vector<int> sides(std::begin(kSweepSides), std::end(kSweepSides));
        const auto rows = run_sweep(c, sides);
        write_json_file(c.out_dir / "sweep.json", sweep_to_json(rows));
        std::cout << format_sweep_table(rows);
        return 0;
    }

    const PipelineResult r = run_pipeline(c);
    write_pipeline_outputs(c, r);
    std::cout << "tiles " << r.plan.tiles.size() << ", detections " << r.detections_before_fusion << " -> "
              << r.fused.boxes.size() << " after fusion\n";
    std::printf("timings (ms): plan %.1f  tile %.1f  detect %.1f  fuse %.1f  eval %.1f\n", r.timings.plan_ms,
                r.timings.tile_ms, r.timings.detect_ms, r.timings.fuse_ms, r.timings.eval_ms);
    if (r.report) std::cout << '\n' << format_report_table(*r.report);
    return 0;
}

// ---------------------------------------------------------------- scene

struct SceneArgs {
    SceneSpec spec;
    std::string out_image, out_gt;
};

int cmd_scene(const SceneArgs& a) {
    const AnnotationSet gt = make_scene_annotations(a.spec);
    write_json_file(a.out_gt, annotations_to_json(gt));
    if (!a.out_image.empty()) write_png(a.out_image, render_scene(a.spec, gt));
    std::cout << "scene " << a.spec.width << "x" << a.spec.height << " with " << gt.boxes.size() << " objects\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tiled detection, fusion and evaluation for large raster images"};
    app.require_subcommand(1);

    PlanArgs plan;
    auto* plan_cmd = app.add_subcommand("plan", "Plan Poisson-disk tiles over an image");
    plan_cmd->add_option("--image", plan.image, "Source raster (PNG/TIFF); only its size is read")->check(CLI::ExistingFile);
    plan_cmd->add_option("--width", plan.width, "Image width when no --image is given");
    plan_cmd->add_option("--height", plan.height, "Image height when no --image is given");
    plan_cmd->add_option("--side", plan.side, "Tile side in pixels")->capture_default_str();
    plan_cmd->add_option("--radius", plan.radius, "Poisson radius (default side/2)");
    plan_cmd->add_option("--k", plan.k, "Candidate attempts per active sample")->capture_default_str();
    plan_cmd->add_option("--seed", plan.seed, "User seed")->capture_default_str();
    plan_cmd->add_option("--image-id", plan.image_id, "Image id mixed into the seed (default: image file stem)");
    plan_cmd->add_option("--out", plan.out, "Plan JSON output")->required();
    plan_cmd->add_option("--emit-points", plan.points, "Write the Poisson samples as JSON lines");

    TileArgs tile;
    auto* tile_cmd = app.add_subcommand("tile", "Extract tile rasters for a plan");
    tile_cmd->add_option("--image", tile.image)->required()->check(CLI::ExistingFile);
    tile_cmd->add_option("--plan", tile.plan)->required()->check(CLI::ExistingFile);
    tile_cmd->add_option("--out-dir", tile.out_dir)->required();
    tile_cmd->add_option("--workers", tile.workers, "Worker threads (0 = CPU count)");

    DetectArgs detect;
    auto* detect_cmd = app.add_subcommand("detect", "Run detectors over planned tiles");
    detect_cmd->add_option("--plan", detect.plan)->required()->check(CLI::ExistingFile);
    detect_cmd->add_option("--config", detect.config, "Run config providing detectors")->check(CLI::ExistingFile);
    detect_cmd->add_option("--detector", detect.detector_files, "Detector spec JSON (repeatable)")->check(CLI::ExistingFile);
    detect_cmd->add_option("--tiles-dir", detect.tiles_dir, "Directory of tile_NNNNN.png rasters (plugins)");
    detect_cmd->add_option("--gt", detect.gt, "Ground truth for synthetic detectors")->check(CLI::ExistingFile);
    detect_cmd->add_option("--frame", detect.frame, "Output frame: global or local")->capture_default_str();
    detect_cmd->add_option("--out", detect.out, "Detection sets JSONL")->required();
    detect_cmd->add_option("--workers", detect.workers, "Worker threads (0 = CPU count)");

    FuseArgs fuse;
    auto* fuse_cmd = app.add_subcommand("fuse", "Merge global-frame detections into one annotation set");
    fuse_cmd->add_option("--dets", fuse.dets, "Detection sets JSONL (global frame)")->required()->check(CLI::ExistingFile);
    fuse_cmd->add_option("--plan", fuse.plan, "Tile plan; enables tile-edge deduplication")->check(CLI::ExistingFile);
    fuse_cmd->add_option("--config", fuse.config, "Run config (fusion settings, detector weights)")->check(CLI::ExistingFile);
    fuse_cmd->add_option("--out", fuse.out, "Fused JSON output")->required();
    fuse_cmd->add_option("--yolo", fuse.yolo, "Also write YOLO text labels");
    fuse_cmd->add_option("--overlay", fuse.overlay, "Render boxes over --image into this PNG");
    fuse_cmd->add_option("--image", fuse.image, "Source raster for --overlay")->check(CLI::ExistingFile);
    fuse_cmd->add_option("--image-id", fuse.image_id, "Image id recorded in the output");
    fuse.flags.add_to(fuse_cmd);

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score detections against ground truth");
    eval_cmd->add_option("--gt", ev.gt)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--dets", ev.dets, "Fused JSON (or any file with a boxes array)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--iou", ev.iou, "Match when IoU exceeds this")->capture_default_str();
    eval_cmd->add_option("--ap", ev.ap, "AP interpolation: all-point or 11-point")->capture_default_str();
    eval_cmd->add_option("--out", ev.out, "Report JSON output");

    auto* synth_cmd = app.add_subcommand("synth", "Synthetic training data");
    synth_cmd->require_subcommand(1);
    CropArgs crops;
    auto* crops_cmd = synth_cmd->add_subcommand("crops", "Random labelled crops from an annotated image");
    crops_cmd->add_option("--image", crops.image)->required()->check(CLI::ExistingFile);
    crops_cmd->add_option("--gt", crops.gt)->required()->check(CLI::ExistingFile);
    crops_cmd->add_option("--side", crops.side)->capture_default_str();
    crops_cmd->add_option("--count", crops.count)->required();
    crops_cmd->add_option("--seed", crops.seed)->capture_default_str();
    crops_cmd->add_option("--visibility", crops.visibility)->capture_default_str();
    crops_cmd->add_option("--out-dir", crops.out_dir)->required();
    MixArgs mix;
    auto* mix_cmd = synth_cmd->add_subcommand("mix", "Build a mixed original/synthetic manifest");
    mix_cmd->add_option("--original", mix.original, "Original items JSONL {raster, labels}")->check(CLI::ExistingFile);
    mix_cmd->add_option("--synthetic", mix.synthetic, "Synthetic items JSONL")->check(CLI::ExistingFile);
    mix_cmd->add_option("--ratio", mix.ratio, "Percent of original items")->required();
    mix_cmd->add_option("--size", mix.size, "Manifest size (default: original pool size)");
    mix_cmd->add_option("--seed", mix.seed)->capture_default_str();
    mix_cmd->add_option("--out", mix.out)->required();

    PipelineArgs pipe;
    auto* pipe_cmd = app.add_subcommand("pipeline", "plan -> tile -> detect -> fuse (-> eval)");
    pipe_cmd->add_option("--config", pipe.config, "Run config JSON")->check(CLI::ExistingFile);
    pipe_cmd->add_option("--image", pipe.image)->check(CLI::ExistingFile);
    pipe_cmd->add_option("--gt", pipe.gt)->check(CLI::ExistingFile);
    pipe_cmd->add_option("--out-dir", pipe.out_dir);
    pipe_cmd->add_option("--image-id", pipe.image_id);
    pipe_cmd->add_option("--side", pipe.side);
    pipe_cmd->add_option("--radius", pipe.radius);
    pipe_cmd->add_option("--k", pipe.k);
    pipe_cmd->add_option("--seed", pipe.seed);
    pipe_cmd->add_option("--workers", pipe.workers, "Worker threads (0 = CPU count)");
    pipe_cmd->add_option("--iou", pipe.match_iou, "Evaluation match threshold");
    pipe_cmd->add_flag("--overlay", pipe.overlay, "Write overlay.png");
    pipe_cmd->add_flag("--sweep", pipe.sweep, "Run whole-image and 320/640/1280 tiles and compare");
    pipe.flags.add_to(pipe_cmd);

    SceneArgs scene;
    auto* scene_cmd = app.add_subcommand("scene", "Generate a synthetic annotated canvas");
    scene_cmd->add_option("--width", scene.spec.width)->capture_default_str();
    scene_cmd->add_option("--height", scene.spec.height)->capture_default_str();
    scene_cmd->add_option("--objects", scene.spec.objects)->capture_default_str();
    scene_cmd->add_option("--min-size", scene.spec.min_px)->capture_default_str();
    scene_cmd->add_option("--max-size", scene.spec.max_px)->capture_default_str();
    scene_cmd->add_option("--classes", scene.spec.classes)->capture_default_str();
    scene_cmd->add_option("--seed", scene.spec.seed)->capture_default_str();
    scene_cmd->add_option("--image-id", scene.spec.image_id)->capture_default_str();
    scene_cmd->add_option("--out-image", scene.out_image, "PNG output (omit for labels only)");
    scene_cmd->add_option("--out-gt", scene.out_gt)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*plan_cmd) return cmd_plan(plan);
        if (*tile_cmd) return cmd_tile(tile);
        if (*detect_cmd) return cmd_detect(detect);
        if (*fuse_cmd) return cmd_fuse(fuse);
        if (*eval_cmd) return cmd_eval(ev);
        if (*crops_cmd) return cmd_synth_crops(crops);
        if (*mix_cmd) return cmd_synth_mix(mix);
        if (*pipe_cmd) return cmd_pipeline(pipe);
        if (*scene_cmd) return cmd_scene(scene);
    } catch (const ValidationError& e) {
        std::cerr << "error[config]: " << e.what() << "\n";
        return kExitValidation;
    } catch (const PluginError& e) {
        std::cerr << "error[plugin]: " << e.what() << "\n";
        return kExitPlugin;
    } catch (const ProtocolError& e) {
        std::cerr << "error[protocol]: " << e.what() << "\n";
        return kExitPlugin;
    } catch (const IoError& e) {
        std::cerr << "error[io]: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error[io]: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
