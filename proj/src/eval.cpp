#include "lrsaa/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

namespace lrsaa {

namespace {

std::vector<int> score_order(const std::vector<BBox>& dets) {
    std::vector<int> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dets[a].score > dets[b].score; });
    return order;
}

// Index of the best unmatched same-class gt box for `d`, or -1.
int best_match(const BBox& d, const std::vector<BBox>& gt, const std::vector<char>& taken, double threshold,
               double* best_iou) {
    int best = -1;
    double best_value = 0.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
        if (taken[g] || gt[g].class_id != d.class_id) continue;
        const double v = iou(d, gt[g]);
        if (v > threshold && (best < 0 || v > best_value)) {
            best = static_cast<int>(g);
            best_value = v;
        }
    }
    if (best_iou) *best_iou = best_value;
    return best;
}

double ratio(int num, int den) { return den > 0 ? static_cast<double>(num) / den : 0.0; }

}  // namespace

Matching match_detections(const std::vector<BBox>& dets, const AnnotationSet& gt, double iou_threshold) {
    Matching m;
    m.detection_count = static_cast<int>(dets.size());
    m.ground_truth_count = static_cast<int>(gt.boxes.size());

    std::vector<char> taken(gt.boxes.size(), 0);
    std::vector<char> det_matched(dets.size(), 0);
    for (int d : score_order(dets)) {
        double value = 0.0;
        const int g = best_match(dets[d], gt.boxes, taken, iou_threshold, &value);
        if (g < 0) continue;
        taken[g] = 1;
        det_matched[d] = 1;
        m.pairs.push_back({d, g, value});
    }
    for (std::size_t d = 0; d < dets.size(); ++d)
        if (!det_matched[d]) m.unmatched_detections.push_back(static_cast<int>(d));
    for (std::size_t g = 0; g < gt.boxes.size(); ++g)
        if (!taken[g]) m.unmatched_ground_truth.push_back(static_cast<int>(g));
    return m;
}

EvalReport compute_prf1(const Matching& matching) {
    EvalReport r;
    r.tp = static_cast<int>(matching.pairs.size());
    r.fp = matching.detection_count - r.tp;
    r.fn = matching.ground_truth_count - r.tp;
    r.tn = 0;
    r.precision = ratio(r.tp, r.tp + r.fp);
    r.recall = ratio(r.tp, r.tp + r.fn);
    const double pr = r.precision + r.recall;
    r.f1 = pr > 0.0 ? 2.0 * r.precision * r.recall / pr : 0.0;
    r.accuracy = ratio(r.tp + r.tn, r.tp + r.fp + r.fn + r.tn);
    return r;
}

double average_precision(const std::vector<BBox>& dets, const std::vector<BBox>& gt, double iou_threshold,
                         ApInterpolation interpolation) {
    if (gt.empty()) return 0.0;
    const double n_gt = static_cast<double>(gt.size());

    std::vector<char> taken(gt.size(), 0);
    std::vector<double> recall, precision;
    int tp = 0, seen = 0;
    for (int d : score_order(dets)) {
        ++seen;
        const int g = best_match(dets[d], gt, taken, iou_threshold, nullptr);
        if (g >= 0) {
            taken[g] = 1;
            ++tp;
        }
        recall.push_back(tp / n_gt);
        precision.push_back(static_cast<double>(tp) / seen);
    }
    if (recall.empty()) return 0.0;

    // Precision envelope: best precision at any recall at or beyond this point.
    std::vector<double> envelope = precision;
    for (std::size_t i = envelope.size() - 1; i-- > 0;) envelope[i] = std::max(envelope[i], envelope[i + 1]);

    if (interpolation == ApInterpolation::eleven_point) {
        double sum = 0.0;
        for (int t = 0; t <= 10; ++t) {
            const double level = t / 10.0;
            double best = 0.0;
            for (std::size_t i = 0; i < recall.size(); ++i)
                if (recall[i] >= level - 1e-12) best = std::max(best, precision[i]);
            sum += best;
        }
        return sum / 11.0;
    }

    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
        ap += (recall[i] - prev_recall) * envelope[i];
        prev_recall = recall[i];
    }
    return std::clamp(ap, 0.0, 1.0);
}

std::optional<double> mean_ap(const std::map<int, double>& per_class_ap) {
    if (per_class_ap.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& [cls, ap] : per_class_ap) sum += ap;
    return sum / static_cast<double>(per_class_ap.size());
}

EvalReport evaluate(const std::vector<BBox>& dets, const AnnotationSet& gt, double iou_threshold,
                    ApInterpolation interpolation) {
    EvalReport report = compute_prf1(match_detections(dets, gt, iou_threshold));

    std::set<int> classes;
    for (const auto& g : gt.boxes) classes.insert(g.class_id);
    for (int cls : classes) {
        std::vector<BBox> cd, cg;
        for (const auto& d : dets)
            if (d.class_id == cls) cd.push_back(d);
        for (const auto& g : gt.boxes)
            if (g.class_id == cls) cg.push_back(g);
        report.per_class_ap[cls] = average_precision(cd, cg, iou_threshold, interpolation);
    }
    report.map = mean_ap(report.per_class_ap);
    return report;
}

std::string format_report_table(const EvalReport& r, const std::vector<std::string>& class_names) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %8s\n", "", "TP", "FP", "FN", "TN");
    os << line;
    std::snprintf(line, sizeof line, "%-10s %8d %8d %8d %8d\n", "counts", r.tp, r.fp, r.fn, r.tn);
    os << line << '\n';
    auto row = [&](const char* name, double v) {
        std::snprintf(line, sizeof line, "%-10s %8.4f\n", name, v);
        os << line;
    };
    row("accuracy", r.accuracy);
    row("precision", r.precision);
    row("recall", r.recall);
    row("f1", r.f1);
    if (r.map) row("mAP", *r.map);
    else os << "mAP        n/a (no ground truth)\n";
    if (!r.per_class_ap.empty()) {
        os << "\nper-class AP\n";
        for (const auto& [cls, ap] : r.per_class_ap) {
            const std::string name = cls < static_cast<int>(class_names.size()) ? class_names[cls]
                                                                                : "class " + std::to_string(cls);
            std::snprintf(line, sizeof line, "  %-20s %8.4f\n", name.c_str(), ap);
            os << line;
        }
    }
    return os.str();
}

}  // namespace lrsaa
