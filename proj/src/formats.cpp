#include "lrsaa/formats.hpp"

#include <fstream>
#include <sstream>

#include "lrsaa/error.hpp"

namespace lrsaa {

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(ctx + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(ctx + ": bad field '" + key + "': " + e.what());
    }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    return field<T>(j, key, ctx);
}

json parse_line(const std::string& line, int line_no, const std::string& ctx) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw ValidationError(ctx + ": malformed JSON on line " + std::to_string(line_no) + ": " + e.what());
    }
}

template <typename Fn>
void for_each_jsonl(const std::string& text, const std::string& ctx, Fn&& fn) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        fn(parse_line(line, line_no, ctx));
    }
}

}  // namespace

json box_to_json(const BBox& b) {
    return {{"x_min", b.x_min}, {"y_min", b.y_min}, {"x_max", b.x_max},
            {"y_max", b.y_max}, {"class_id", b.class_id}, {"score", b.score}};
}

BBox box_from_json(const json& j) {
    BBox b;
    b.x_min = field<double>(j, "x_min", "box");
    b.y_min = field<double>(j, "y_min", "box");
    b.x_max = field<double>(j, "x_max", "box");
    b.y_max = field<double>(j, "y_max", "box");
    b.class_id = field_or<int>(j, "class_id", 0, "box");
    b.score = field_or<double>(j, "score", 1.0, "box");
    validate(b, "box");
    return b;
}

json plan_to_json(const TilePlan& plan) {
    json tiles = json::array();
    for (const auto& t : plan.tiles)
        tiles.push_back({{"id", t.tile_id}, {"x", t.origin_x}, {"y", t.origin_y}, {"side", t.side},
                         {"provenance", to_string(t.provenance)}});
    return {{"image_width", plan.image_width},
            {"image_height", plan.image_height},
            {"seed", plan.seed},
            {"r", plan.r},
            {"k", plan.k},
            {"side", plan.side},
            {"coverage_fraction", plan.coverage_fraction},
            {"tiles", tiles}};
}

TilePlan plan_from_json(const json& j) {
    const std::string ctx = "plan";
    TilePlan p;
    p.image_width = field<int>(j, "image_width", ctx);
    p.image_height = field<int>(j, "image_height", ctx);
    p.seed = field<std::uint64_t>(j, "seed", ctx);
    p.r = field<double>(j, "r", ctx);
    p.k = field_or<int>(j, "k", 30, ctx);
    p.side = field<int>(j, "side", ctx);
    p.coverage_fraction = field_or<double>(j, "coverage_fraction", 0.0, ctx);
    for (const auto& t : field<json>(j, "tiles", ctx)) {
        Tile tile;
        tile.tile_id = field<int>(t, "id", "plan tile");
        tile.origin_x = field<int>(t, "x", "plan tile");
        tile.origin_y = field<int>(t, "y", "plan tile");
        tile.side = field<int>(t, "side", "plan tile");
        tile.provenance = provenance_from_string(field_or<std::string>(t, "provenance", "poisson", "plan tile"));
        if (tile.tile_id != static_cast<int>(p.tiles.size()))
            throw ValidationError("plan: tile ids must be dense from 0");
        p.tiles.push_back(tile);
    }
    return p;
}

json annotations_to_json(const AnnotationSet& set) {
    json boxes = json::array();
    for (const auto& b : set.boxes) boxes.push_back(box_to_json(b));
    return {{"image", set.image_id},
            {"width", set.image_width},
            {"height", set.image_height},
            {"classes", set.classes},
            {"boxes", boxes}};
}

AnnotationSet annotations_from_json(const json& j) {
    const std::string ctx = "annotations";
    AnnotationSet s;
    s.image_id = field_or<std::string>(j, "image", "", ctx);
    s.image_width = field<int>(j, "width", ctx);
    s.image_height = field<int>(j, "height", ctx);
    s.classes = field_or<std::vector<std::string>>(j, "classes", {}, ctx);
    for (const auto& b : field<json>(j, "boxes", ctx)) s.boxes.push_back(box_from_json(b));
    return s;
}

json detection_set_to_json(const DetectionSet& set) {
    json boxes = json::array();
    for (const auto& b : set.boxes) boxes.push_back(box_to_json(b));
    return {{"detector", set.detector_name},
            {"tile_id", set.tile_id},
            {"frame", set.frame == Frame::local ? "local" : "global"},
            {"detections", boxes}};
}

DetectionSet detection_set_from_json(const json& j) {
    const std::string ctx = "detection set";
    DetectionSet s;
    s.detector_name = field<std::string>(j, "detector", ctx);
    s.tile_id = field<int>(j, "tile_id", ctx);
    const auto frame = field<std::string>(j, "frame", ctx);
    if (frame == "local") s.frame = Frame::local;
    else if (frame == "global") s.frame = Frame::global;
    else throw ValidationError(ctx + ": frame must be 'local' or 'global'");
    for (const auto& b : field<json>(j, "detections", ctx)) s.boxes.push_back(box_from_json(b));
    return s;
}

json fused_to_json(const std::string& image_id, const FusedSet& fused) {
    json boxes = json::array();
    for (std::size_t i = 0; i < fused.boxes.size(); ++i) {
        json b = box_to_json(fused.boxes[i]);
        b["source_count"] = i < fused.source_count.size() ? fused.source_count[i] : 1;
        boxes.push_back(std::move(b));
    }
    return {{"image", image_id}, {"boxes", boxes}};
}

FusedSet fused_from_json(const json& j) {
    FusedSet f;
    for (const auto& b : field<json>(j, "boxes", "fused set")) {
        f.boxes.push_back(box_from_json(b));
        f.source_count.push_back(field_or<int>(b, "source_count", 1, "fused box"));
    }
    return f;
}

json report_to_json(const EvalReport& r) {
    json ap = json::object();
    for (const auto& [cls, v] : r.per_class_ap) ap[std::to_string(cls)] = v;
    return {{"tp", r.tp},
            {"fp", r.fp},
            {"fn", r.fn},
            {"tn", r.tn},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"accuracy", r.accuracy},
            {"per_class_ap", ap},
            {"map", r.map ? json(*r.map) : json(nullptr)}};
}

json noise_profile_to_json(const NoiseProfile& p) {
    return {{"jitter_sigma", p.jitter_sigma},
            {"miss_rate", p.miss_rate},
            {"spurious_rate", p.spurious_rate},
            {"score_model",
             {{"true_mean", p.score_model.true_mean},
              {"true_sigma", p.score_model.true_sigma},
              {"false_mean", p.score_model.false_mean},
              {"false_sigma", p.score_model.false_sigma}}},
            {"seed", p.seed},
            {"visibility", p.visibility},
            {"input_side", p.input_side},
            {"min_object_px", p.min_object_px},
            {"spurious_min_px", p.spurious_min_px},
            {"spurious_max_px", p.spurious_max_px}};
}

NoiseProfile noise_profile_from_json(const json& j) {
    const std::string ctx = "noise profile";
    NoiseProfile p;
    if (j.is_object() && j.value("preset", "") == "realistic") p = NoiseProfile::realistic(0);
    p.jitter_sigma = field_or(j, "jitter_sigma", p.jitter_sigma, ctx);
    p.miss_rate = field_or(j, "miss_rate", p.miss_rate, ctx);
    p.spurious_rate = field_or(j, "spurious_rate", p.spurious_rate, ctx);
    if (j.is_object() && j.contains("score_model")) {
        const auto& s = j.at("score_model");
        p.score_model.true_mean = field_or(s, "true_mean", p.score_model.true_mean, ctx);
        p.score_model.true_sigma = field_or(s, "true_sigma", p.score_model.true_sigma, ctx);
        p.score_model.false_mean = field_or(s, "false_mean", p.score_model.false_mean, ctx);
        p.score_model.false_sigma = field_or(s, "false_sigma", p.score_model.false_sigma, ctx);
    }
    p.seed = field_or<std::uint64_t>(j, "seed", p.seed, ctx);
    p.visibility = field_or(j, "visibility", p.visibility, ctx);
    p.input_side = field_or(j, "input_side", p.input_side, ctx);
    p.min_object_px = field_or(j, "min_object_px", p.min_object_px, ctx);
    p.spurious_min_px = field_or(j, "spurious_min_px", p.spurious_min_px, ctx);
    p.spurious_max_px = field_or(j, "spurious_max_px", p.spurious_max_px, ctx);
    validate(p);
    return p;
}

json detector_spec_to_json(const DetectorSpec& spec) {
    json j = {{"name", spec.name}, {"kind", spec.kind == DetectorKind::plugin ? "plugin" : "synthetic"},
              {"weight", spec.weight}};
    if (spec.kind == DetectorKind::plugin) j["command"] = spec.command;
    else j["noise"] = noise_profile_to_json(spec.noise);
    return j;
}

DetectorSpec detector_spec_from_json(const json& j) {
    const std::string ctx = "detector";
    DetectorSpec s;
    s.name = field<std::string>(j, "name", ctx);
    const auto kind = field<std::string>(j, "kind", ctx);
    if (kind == "plugin") s.kind = DetectorKind::plugin;
    else if (kind == "synthetic") s.kind = DetectorKind::synthetic;
    else throw ValidationError("detector '" + s.name + "': kind must be 'plugin' or 'synthetic'");
    s.weight = field_or(j, "weight", 1.0, ctx);
    if (s.kind == DetectorKind::plugin) {
        const json& cmd = j.contains("command") ? j.at("command") : json();
        if (cmd.is_string()) s.command = {cmd.get<std::string>()};
        else s.command = field_or<std::vector<std::string>>(j, "command", {}, ctx);
    } else if (j.contains("noise")) {
        s.noise = noise_profile_from_json(j.at("noise"));
    }
    validate(s);
    return s;
}

json fusion_config_to_json(const FusionConfig& c) {
    return {{"score_threshold", c.score_threshold}, {"suppression_iou", c.suppression_iou},
            {"eiou_rescoring", c.eiou_rescoring},   {"fuse_coordinates", c.fuse_coordinates},
            {"class_agnostic", c.class_agnostic},   {"border_margin", c.border_margin},
            {"truncation_ios", c.truncation_ios},
            {"stitch_iou", c.stitch_iou}};
}

FusionConfig fusion_config_from_json(const json& j) {
    const std::string ctx = "fusion config";
    FusionConfig c;
    c.score_threshold = field_or(j, "score_threshold", c.score_threshold, ctx);
    c.suppression_iou = field_or(j, "suppression_iou", c.suppression_iou, ctx);
    c.eiou_rescoring = field_or(j, "eiou_rescoring", c.eiou_rescoring, ctx);
    c.fuse_coordinates = field_or(j, "fuse_coordinates", c.fuse_coordinates, ctx);
    c.class_agnostic = field_or(j, "class_agnostic", c.class_agnostic, ctx);
    c.border_margin = field_or(j, "border_margin", c.border_margin, ctx);
    c.truncation_ios = field_or(j, "truncation_ios", c.truncation_ios, ctx);
    c.stitch_iou = field_or(j, "stitch_iou", c.stitch_iou, ctx);
    validate(c);
    return c;
}

std::string points_to_jsonl(const std::vector<Point2>& points) {
    std::string out;
    for (const auto& p : points) {
        out += json{{"x", p.x}, {"y", p.y}}.dump();
        out += '\n';
    }
    return out;
}

std::vector<Point2> points_from_jsonl(const std::string& text) {
    std::vector<Point2> pts;
    for_each_jsonl(text, "points", [&](const json& j) {
        pts.push_back({field<double>(j, "x", "point"), field<double>(j, "y", "point")});
    });
    return pts;
}

std::string detection_sets_to_jsonl(const std::vector<DetectionSet>& sets) {
    std::string out;
    for (const auto& s : sets) {
        out += detection_set_to_json(s).dump();
        out += '\n';
    }
    return out;
}

std::vector<DetectionSet> detection_sets_from_jsonl(const std::string& text) {
    std::vector<DetectionSet> sets;
    for_each_jsonl(text, "detections", [&](const json& j) { sets.push_back(detection_set_from_json(j)); });
    return sets;
}

std::vector<LabeledItem> labeled_items_from_jsonl(const std::string& text) {
    std::vector<LabeledItem> items;
    for_each_jsonl(text, "item list", [&](const json& j) {
        items.push_back({field<std::string>(j, "raster", "item"), field<std::string>(j, "labels", "item")});
    });
    return items;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create '" + path.string() + "'");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace lrsaa
