#pragma once

#include <string>

namespace lrsaa {

/// Axis-aligned box in continuous pixel coordinates.
///
/// Boxes are pure geometry: no inclusive/exclusive pixel-edge convention is
/// applied anywhere in this module. Zero-area boxes are allowed.
struct BBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;
    int class_id = 0;
    double score = 1.0;

    double width() const noexcept { return x_max - x_min; }
    double height() const noexcept { return y_max - y_min; }
    double area() const noexcept { return width() * height(); }
    double center_x() const noexcept { return 0.5 * (x_min + x_max); }
    double center_y() const noexcept { return 0.5 * (y_min + y_max); }

    bool operator==(const BBox&) const = default;
};

// Denominator floor used when the enclosing box collapses along an axis.
inline constexpr double kEiouEpsilon = 1e-9;

bool is_valid(const BBox& b) noexcept;

// Throws ValidationError naming `what` when the box has a negative extent,
// a non-finite coordinate, a negative class id or a score outside [0,1].
void validate(const BBox& b, const std::string& what = "box");

double intersection_area(const BBox& a, const BBox& b) noexcept;

double iou(const BBox& a, const BBox& b);

/// Smallest axis-aligned box containing both inputs. Class and score are
/// taken from `a`.
BBox enclosing_box(const BBox& a, const BBox& b);

/// EIoU dissimilarity:
///
///   1 - IoU + d^2 / c^2 + (w_a - w_b)^2 / c_w^2 + (h_a - h_b)^2 / c_h^2
///
/// where d is the distance between box centres and c_w, c_h, c are the
/// width, height and diagonal of the smallest enclosing box. A zero
/// enclosing extent is replaced by kEiouEpsilon. Two identical boxes score 0,
/// including the degenerate case of two identical points.
double eiou_loss(const BBox& a, const BBox& b);

}  // namespace lrsaa
