#include "lrsaa/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "lrsaa/error.hpp"

namespace lrsaa {

bool is_valid(const BBox& b) noexcept {
    return std::isfinite(b.x_min) && std::isfinite(b.y_min) && std::isfinite(b.x_max) &&
           std::isfinite(b.y_max) && b.x_min <= b.x_max && b.y_min <= b.y_max && b.class_id >= 0 &&
           b.score >= 0.0 && b.score <= 1.0;
}

void validate(const BBox& b, const std::string& what) {
    if (is_valid(b)) return;
    throw ValidationError(what + ": invalid box (" + std::to_string(b.x_min) + ", " + std::to_string(b.y_min) +
                          ", " + std::to_string(b.x_max) + ", " + std::to_string(b.y_max) +
                          ", class " + std::to_string(b.class_id) + ", score " + std::to_string(b.score) + ")");
}

double intersection_area(const BBox& a, const BBox& b) noexcept {
    const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

double iou(const BBox& a, const BBox& b) {
    validate(a, "iou lhs");
    validate(b, "iou rhs");
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

BBox enclosing_box(const BBox& a, const BBox& b) {
    BBox out = a;
    out.x_min = std::min(a.x_min, b.x_min);
    out.y_min = std::min(a.y_min, b.y_min);
    out.x_max = std::max(a.x_max, b.x_max);
    out.y_max = std::max(a.y_max, b.y_max);
    return out;
}

double eiou_loss(const BBox& a, const BBox& b) {
    validate(a, "eiou lhs");
    validate(b, "eiou rhs");
    if (a.x_min == b.x_min && a.y_min == b.y_min && a.x_max == b.x_max && a.y_max == b.y_max) return 0.0;

    const BBox c = enclosing_box(a, b);
    auto floor_eps = [](double v) { return v > 0.0 ? v : kEiouEpsilon; };
    const double cw2 = floor_eps(c.width() * c.width());
    const double ch2 = floor_eps(c.height() * c.height());
    const double diag2 = floor_eps(c.width() * c.width() + c.height() * c.height());

    const double dx = a.center_x() - b.center_x();
    const double dy = a.center_y() - b.center_y();
    const double dw = a.width() - b.width();
    const double dh = a.height() - b.height();

    const double center_term = (dx * dx + dy * dy) / diag2;
    const double shape_term = dw * dw / cw2 + dh * dh / ch2;
    return 1.0 - iou(a, b) + center_term + shape_term;
}

}  // namespace lrsaa
