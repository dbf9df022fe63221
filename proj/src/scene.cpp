#include "lrsaa/scene.hpp"

#include <algorithm>
#include <cmath>

#include "lrsaa/error.hpp"
#include "lrsaa/rng.hpp"

namespace lrsaa {

AnnotationSet make_scene_annotations(const SceneSpec& spec) {
    if (spec.width < 1 || spec.height < 1 || spec.objects < 0 || spec.classes < 1)
        throw ValidationError("scene: bad dimensions, object count or class count");
    if (!(spec.min_px > 0.0) || spec.max_px < spec.min_px || spec.max_px > std::min(spec.width, spec.height))
        throw ValidationError("scene: object size range must satisfy 0 < min <= max <= image side");

    AnnotationSet set;
    set.image_id = spec.image_id;
    set.image_width = spec.width;
    set.image_height = spec.height;
    for (int c = 0; c < spec.classes; ++c) set.classes.push_back("class" + std::to_string(c));

    Rng rng(mix_seed(spec.seed, 0x5ce7e));
    const long attempts_max = 1000L * std::max(1, spec.objects);
    long attempts = 0;
    while (static_cast<int>(set.boxes.size()) < spec.objects) {
        if (++attempts > attempts_max) throw ValidationError("scene: could not place objects without overlap");
        const int w = static_cast<int>(std::lround(rng.uniform(spec.min_px, spec.max_px)));
        const int h = static_cast<int>(std::lround(rng.uniform(spec.min_px, spec.max_px)));
        const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.width - w + 1)));
        const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.height - h + 1)));
        BBox b{double(x), double(y), double(x + w), double(y + h),
               static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.classes))), 1.0};
        // Keep a small gap so objects stay distinct.
        const bool clash = std::any_of(set.boxes.begin(), set.boxes.end(), [&](const BBox& o) {
            return b.x_min < o.x_max + 2 && o.x_min < b.x_max + 2 && b.y_min < o.y_max + 2 && o.y_min < b.y_max + 2;
        });
        if (!clash) set.boxes.push_back(b);
    }
    return set;
}

ImageRaster render_scene(const SceneSpec& spec, const AnnotationSet& annotations) {
    ImageRaster img(spec.width, spec.height, 1);
    for (int y = 0; y < spec.height; ++y) {
        std::uint8_t* row = img.row(y);
        for (int x = 0; x < spec.width; ++x) {
            // Cheap deterministic texture.
            const std::uint64_t h = mix_seed(spec.seed, (std::uint64_t(y) << 32) | std::uint32_t(x));
            row[x] = static_cast<std::uint8_t>(40 + (h & 31));
        }
    }
    for (const auto& b : annotations.boxes) {
        const auto level = static_cast<std::uint8_t>(160 + (b.class_id * 37) % 90);
        const int x0 = std::max(0, static_cast<int>(b.x_min)), x1 = std::min(spec.width, static_cast<int>(b.x_max));
        const int y0 = std::max(0, static_cast<int>(b.y_min)), y1 = std::min(spec.height, static_cast<int>(b.y_max));
        for (int y = y0; y < y1; ++y) std::fill(img.row(y) + x0, img.row(y) + x1, level);
    }
    return img;
}

}  // namespace lrsaa
