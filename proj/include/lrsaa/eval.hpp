#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lrsaa/annotations.hpp"
#include "lrsaa/geometry.hpp"

namespace lrsaa {

inline constexpr double kDefaultMatchIou = 0.5;

struct MatchPair {
    int detection = 0;
    int ground_truth = 0;
    double iou = 0.0;
};

struct Matching {
    std::vector<MatchPair> pairs;
    std::vector<int> unmatched_detections;
    std::vector<int> unmatched_ground_truth;
    int detection_count = 0;
    int ground_truth_count = 0;
};

/// Greedy per-class matching. Detections are visited by score descending
/// (ties by index); each takes the unmatched same-class ground-truth box with
/// the highest IoU, provided IoU > iou_threshold (strictly).
Matching match_detections(const std::vector<BBox>& dets, const AnnotationSet& gt,
                          double iou_threshold = kDefaultMatchIou);

enum class ApInterpolation { all_point, eleven_point };

struct EvalReport {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    int tn = 0;  // always 0: open-world detection has no negatives universe
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;  // TP / (TP + FP + FN)
    std::map<int, double> per_class_ap;  // classes with at least one gt box
    std::optional<double> map;           // absent when no class has gt
};

/// Counts and ratio metrics; zero denominators give 0.
EvalReport compute_prf1(const Matching& matching);

/// Area under the precision envelope for one class. `dets` and `gt` must
/// already be restricted to that class. Detections are ranked by score
/// descending with index tie-break.
double average_precision(const std::vector<BBox>& dets, const std::vector<BBox>& gt,
                         double iou_threshold = kDefaultMatchIou,
                         ApInterpolation interpolation = ApInterpolation::all_point);

/// Unweighted mean over classes present in `per_class_ap`.
std::optional<double> mean_ap(const std::map<int, double>& per_class_ap);

EvalReport evaluate(const std::vector<BBox>& dets, const AnnotationSet& gt,
                    double iou_threshold = kDefaultMatchIou,
                    ApInterpolation interpolation = ApInterpolation::all_point);

std::string format_report_table(const EvalReport& report, const std::vector<std::string>& class_names = {});

}  // namespace lrsaa
