#include <doctest.h>

#include <algorithm>

#include "lrsaa/error.hpp"
#include "lrsaa/eval.hpp"
#include "lrsaa/geometry.hpp"
#include "support.hpp"

using namespace lrsaa;

namespace {

AnnotationSet gt_of(std::vector<BBox> boxes, int w = 1000, int h = 1000) {
    AnnotationSet gt;
    gt.image_id = "x";
    gt.image_width = w;
    gt.image_height = h;
    gt.boxes = std::move(boxes);
    return gt;
}

// Riemann-sum oracle over the precision envelope, built from the raw
// (recall, precision) sweep.
double ap_oracle(const std::vector<bool>& hits_in_rank_order, int gt_count) {
    std::vector<std::pair<double, double>> pr;
    int tp = 0;
    for (std::size_t i = 0; i < hits_in_rank_order.size(); ++i) {
        tp += hits_in_rank_order[i] ? 1 : 0;
        pr.emplace_back(double(tp) / gt_count, double(tp) / double(i + 1));
    }
    const int steps = 200000;
    double sum = 0.0;
    for (int s = 0; s < steps; ++s) {
        const double t = (s + 0.5) / steps;
        double best = 0.0;
        for (const auto& [r, p] : pr)
            if (r >= t) best = std::max(best, p);
        sum += best;
    }
    return sum / steps;
}

}  // namespace

TEST_CASE("match_detections threshold is strict") {
    const BBox g{0, 0, 10, 10};
    // IoU 0.6: 10x6 inside 10x10 ... overlap 60, union 100.
    CHECK(match_detections({{0, 0, 10, 6, 0, 0.9}}, gt_of({g})).pairs.size() == 1);
    // IoU exactly 0.5.
    const BBox half{0, 0, 10, 5, 0, 0.9};
    REQUIRE(iou(half, g) == 0.5);
    const Matching m = match_detections({half}, gt_of({g}));
    CHECK(m.pairs.empty());
    CHECK(m.unmatched_detections == std::vector<int>{0});
    CHECK(m.unmatched_ground_truth == std::vector<int>{0});
}

TEST_CASE("higher score wins the ground-truth box") {
    const BBox g{0, 0, 10, 10};
    const std::vector<BBox> dets = {{0, 0, 10, 9, 0, 0.8}, {0, 0, 10, 8, 0, 0.9}};
    const Matching m = match_detections(dets, gt_of({g}));
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].detection == 1);
    CHECK(m.unmatched_detections == std::vector<int>{0});
}

TEST_CASE("classes never match across") {
    const Matching m = match_detections({{0, 0, 10, 10, 1, 0.9}}, gt_of({{0, 0, 10, 10, 0}}));
    CHECK(m.pairs.empty());
}

TEST_CASE("compute_prf1") {
    Matching m;
    m.pairs.resize(3);
    m.unmatched_detections = {5};
    m.unmatched_ground_truth = {1, 2};
    m.detection_count = 4;
    m.ground_truth_count = 5;
    const EvalReport r = compute_prf1(m);
    CHECK(r.tp == 3);
    CHECK(r.fp == 1);
    CHECK(r.fn == 2);
    CHECK(r.tn == 0);
    CHECK(r.precision == 0.75);
    CHECK(r.recall == 0.6);
    CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.accuracy == 0.5);

    const EvalReport zero = compute_prf1(Matching{});
    CHECK(zero.precision == 0.0);
    CHECK(zero.recall == 0.0);
    CHECK(zero.f1 == 0.0);
    CHECK(zero.accuracy == 0.0);

    Matching one;
    one.pairs.resize(1);
    one.detection_count = 1;
    one.ground_truth_count = 1;
    const EvalReport perfect = compute_prf1(one);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.accuracy == 1.0);
}

TEST_CASE("average precision on the hit-miss-hit ranking") {
    const std::vector<BBox> gt = {{0, 0, 10, 10}, {100, 100, 110, 110}};
    const std::vector<BBox> dets = {{0, 0, 10, 10, 0, 0.9}, {50, 50, 60, 60, 0, 0.8}, {100, 100, 110, 110, 0, 0.7}};
    const double ap = average_precision(dets, gt);
    CHECK(std::abs(ap - 5.0 / 6.0) <= 1e-12);
    CHECK(std::abs(ap - ap_oracle({true, false, true}, 2)) <= 1e-4);
    CHECK(mean_ap({{0, ap}}).value() == ap);
}

TEST_CASE("average precision edge cases") {
    const std::vector<BBox> gt = {{0, 0, 10, 10}, {100, 100, 110, 110}};
    CHECK(average_precision({{0, 0, 10, 10, 0, 0.5}, {100, 100, 110, 110, 0, 0.4}}, gt) == 1.0);
    CHECK(average_precision({{50, 50, 60, 60, 0, 0.9}}, gt) == 0.0);
    CHECK(average_precision({}, gt) == 0.0);
}

TEST_CASE("average precision matches the envelope oracle on random rankings") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const int g = 1 + static_cast<int>(rng.below(6));
        std::vector<BBox> gt;
        for (int i = 0; i < g; ++i) gt.push_back({i * 100.0, 0, i * 100.0 + 10, 10});
        std::vector<BBox> dets;
        std::vector<bool> hits;
        std::vector<int> order(g);
        for (int i = 0; i < g; ++i) order[i] = i;
        int next = 0;
        const int n = static_cast<int>(rng.below(10));
        for (int i = 0; i < n; ++i) {
            const double score = 1.0 - i * 0.01;
            if (next < g && rng.below(2) == 0) {
                const BBox& b = gt[next++];
                dets.push_back({b.x_min, b.y_min, b.x_max, b.y_max, 0, score});
                hits.push_back(true);
            } else {
                dets.push_back({5000, 5000, 5010, 5010, 0, score});
                hits.push_back(false);
            }
        }
        CHECK(std::abs(average_precision(dets, gt) - ap_oracle(hits, g)) <= 1e-4);
    }
}

TEST_CASE("eleven-point interpolation") {
    const std::vector<BBox> gt = {{0, 0, 10, 10}, {100, 100, 110, 110}};
    const std::vector<BBox> dets = {{0, 0, 10, 10, 0, 0.9}, {50, 50, 60, 60, 0, 0.8}, {100, 100, 110, 110, 0, 0.7}};
    // Recall levels 0..0.5 take precision 1, 0.6..1.0 take 2/3.
    const double expected = (6 * 1.0 + 5 * (2.0 / 3.0)) / 11.0;
    CHECK(average_precision(dets, gt, 0.5, ApInterpolation::eleven_point) == doctest::Approx(expected));
}

TEST_CASE("mean_ap") {
    CHECK(mean_ap({{0, 1.0}, {1, 0.0}}).value() == 0.5);
    CHECK_FALSE(mean_ap({}).has_value());
}

TEST_CASE("evaluate excludes classes without ground truth from mAP") {
    AnnotationSet gt = gt_of({{0, 0, 10, 10, 0}, {20, 20, 30, 30, 1}});
    gt.classes = {"a", "b", "c"};
    const std::vector<BBox> dets = {{0, 0, 10, 10, 0, 0.9}, {500, 500, 510, 510, 2, 0.9}};
    const EvalReport r = evaluate(dets, gt);
    CHECK(r.per_class_ap.size() == 2);
    CHECK(r.per_class_ap.at(0) == 1.0);
    CHECK(r.per_class_ap.at(1) == 0.0);
    CHECK(r.map.value() == 0.5);
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);
    CHECK(r.fn == 1);
    CHECK_FALSE(evaluate(dets, gt_of({})).map.has_value());
}

TEST_CASE("self evaluation is perfect") {
    Rng rng(11);
    AnnotationSet gt = gt_of({});
    for (int i = 0; i < 50; ++i) {
        BBox b{i * 20.0, 0, i * 20.0 + 15, 15, static_cast<int>(rng.below(3)), 1.0};
        gt.boxes.push_back(b);
    }
    const EvalReport r = evaluate(gt.boxes, gt);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.map.value() == 1.0);
}

TEST_CASE("recall never decreases as the score threshold drops") {
    Rng rng(12);
    AnnotationSet gt = gt_of({});
    for (int i = 0; i < 40; ++i) gt.boxes.push_back(test::random_box(rng, 1000, 10, 40));
    std::vector<BBox> dets;
    for (const auto& g : gt.boxes) {
        BBox d = g;
        d.x_min += rng.normal() * 2;
        d.x_max = std::max(d.x_min + 1, d.x_max + rng.normal() * 2);
        d.score = rng.uniform();
        dets.push_back(d);
    }
    double last = 0.0;
    for (double thr = 1.0; thr >= 0.0; thr -= 0.05) {
        std::vector<BBox> kept;
        for (const auto& d : dets)
            if (d.score >= thr) kept.push_back(d);
        const double rec = evaluate(kept, gt).recall;
        CHECK(rec >= last);
        last = rec;
    }
}

TEST_CASE("report table lists the metrics") {
    const EvalReport r = evaluate({{0, 0, 10, 10, 0, 0.9}}, gt_of({{0, 0, 10, 10, 0}}));
    const std::string table = format_report_table(r, {"car"});
    CHECK(table.find("precision") != std::string::npos);
    CHECK(table.find("car") != std::string::npos);
}
