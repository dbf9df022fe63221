#pragma once

#include <string>
#include <vector>

#include "lrsaa/geometry.hpp"

namespace lrsaa {

/// Ground-truth boxes for one image. Ground truth carries score 1.
struct AnnotationSet {
    std::string image_id;
    int image_width = 0;
    int image_height = 0;
    std::vector<std::string> classes;  // index = class_id; may be empty
    std::vector<BBox> boxes;
};

// Clips every box to the image, drops empty ones and rejects class ids
// outside the declared class table (when one is declared).
void normalize_annotations(AnnotationSet& set);

}  // namespace lrsaa
