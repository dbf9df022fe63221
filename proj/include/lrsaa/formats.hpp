#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrsaa/annotations.hpp"
#include "lrsaa/detector.hpp"
#include "lrsaa/eval.hpp"
#include "lrsaa/fusion.hpp"
#include "lrsaa/poisson.hpp"
#include "lrsaa/synthgen.hpp"
#include "lrsaa/tiling.hpp"

// JSON file formats shared by the CLI and the pipeline.
namespace lrsaa {

using json = nlohmann::json;

json box_to_json(const BBox& b);
BBox box_from_json(const json& j);  // score defaults to 1

json plan_to_json(const TilePlan& plan);
TilePlan plan_from_json(const json& j);

json annotations_to_json(const AnnotationSet& set);
AnnotationSet annotations_from_json(const json& j);

json detection_set_to_json(const DetectionSet& set);
DetectionSet detection_set_from_json(const json& j);

json fused_to_json(const std::string& image_id, const FusedSet& fused);
FusedSet fused_from_json(const json& j);

json report_to_json(const EvalReport& report);

json noise_profile_to_json(const NoiseProfile& p);
NoiseProfile noise_profile_from_json(const json& j);

json detector_spec_to_json(const DetectorSpec& spec);
DetectorSpec detector_spec_from_json(const json& j);

json fusion_config_to_json(const FusionConfig& c);
FusionConfig fusion_config_from_json(const json& j);

std::string points_to_jsonl(const std::vector<Point2>& points);
std::vector<Point2> points_from_jsonl(const std::string& text);

std::string detection_sets_to_jsonl(const std::vector<DetectionSet>& sets);
std::vector<DetectionSet> detection_sets_from_jsonl(const std::string& text);

std::vector<LabeledItem> labeled_items_from_jsonl(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
json read_json_file(const std::filesystem::path& path);
// Pretty-printed with 2-space indent and a trailing newline.
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace lrsaa
