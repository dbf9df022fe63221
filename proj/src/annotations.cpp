#include "lrsaa/annotations.hpp"

#include "lrsaa/error.hpp"
#include "lrsaa/tiling.hpp"

namespace lrsaa {

void normalize_annotations(AnnotationSet& set) {
    if (set.image_width < 1 || set.image_height < 1)
        throw ValidationError("annotations '" + set.image_id + "': image dimensions must be positive");
    std::vector<BBox> kept;
    kept.reserve(set.boxes.size());
    for (const auto& b : set.boxes) {
        validate(b, "annotation in '" + set.image_id + "'");
        if (!set.classes.empty() && b.class_id >= static_cast<int>(set.classes.size()))
            throw ValidationError("annotations '" + set.image_id + "': class id " + std::to_string(b.class_id) +
                                  " not in class table");
        if (auto c = clip_to_image(b, set.image_width, set.image_height)) kept.push_back(*c);
    }
    set.boxes = std::move(kept);
}

}  // namespace lrsaa
