#pragma once

#include <vector>

#include "lrsaa/detector.hpp"
#include "lrsaa/geometry.hpp"
#include "lrsaa/tiling.hpp"

namespace lrsaa {

struct FusionConfig {
    double score_threshold = 0.25;
    double suppression_iou = 0.5;  // removal predicate: IoU > suppression_iou
    // Equal-score candidates are ranked by their mean EIoU loss to the
    // equal-score, same-class boxes they overlap (lower first), so the most
    // central box of a tied cluster is the one retained.
    bool eiou_rescoring = true;
    // Replace each keeper's coordinates with the score-weighted mean of its
    // cluster. Off by default; when on, output boxes are no longer a subset
    // of the input.
    bool fuse_coordinates = false;
    bool class_agnostic = false;

    // Border-aware deduplication in ensemble_merge (needs the tile plan). A
    // detection touching an interior tile edge (within border_margin px) is
    // dropped when an untruncated detection of the same class covers at least
    // truncation_ios of its area. A negative margin disables the pass.
    // Remaining truncated detections from different tiles are stitched into
    // their enclosing box when their parts inside the two tiles' shared
    // window have IoU > stitch_iou.
    double border_margin = 1.0;
    double truncation_ios = 0.5;
    double stitch_iou = 0.5;
};

void validate(const FusionConfig& config);

struct FusedSet {
    std::vector<BBox> boxes;
    std::vector<int> source_count;  // parallel to boxes
};

/// Greedy NMS with a uniform-grid candidate index.
///
/// Ranking: score descending, then (when eiou_rescoring) mean EIoU loss to
/// overlapping equal-score peers ascending, then box coordinates and class
/// lexicographically, then input index. The top remaining box is kept and
/// every remaining same-class box with IoU > suppression_iou is absorbed into
/// its source_count. Output is in keep order.
FusedSet eiou_nms(const std::vector<BBox>& boxes, const FusionConfig& config);

/// Quadratic reference with the same contract as eiou_nms; no acceleration.
FusedSet reference_nms(const std::vector<BBox>& boxes, const FusionConfig& config);

struct DetectorOutput {
    DetectorSpec spec;
    std::vector<DetectionSet> sets;  // global frame
};

/// Weighted pooling across detectors and tiles followed by eiou_nms.
///
/// Scores are multiplied by the detector weight and clamped to [0,1], then
/// thresholded. When `plan` is given, detections truncated at interior tile
/// edges that are covered by an untruncated detection are dropped first and
/// the remaining truncated fragments of one object are stitched together.
/// Throws ValidationError on local-frame input.
FusedSet ensemble_merge(const std::vector<DetectorOutput>& per_detector, const FusionConfig& config,
                        const TilePlan* plan = nullptr);

}  // namespace lrsaa
