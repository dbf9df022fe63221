#pragma once

#include <cstdint>
#include <string>

#include "lrsaa/annotations.hpp"
#include "lrsaa/raster.hpp"

namespace lrsaa {

struct SceneSpec {
    int width = 6400;
    int height = 6400;
    int objects = 100;
    double min_px = 20.0;
    double max_px = 60.0;
    int classes = 1;
    std::uint64_t seed = 0;
    std::string image_id = "scene";
};

/// Random non-overlapping axis-aligned objects with integer corners.
AnnotationSet make_scene_annotations(const SceneSpec& spec);

/// Single-band canvas: textured background with each object painted as a
/// filled rectangle whose grey level encodes its class.
ImageRaster render_scene(const SceneSpec& spec, const AnnotationSet& annotations);

}  // namespace lrsaa
