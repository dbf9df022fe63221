#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrsaa/annotations.hpp"
#include "lrsaa/raster.hpp"

namespace lrsaa {

struct LabeledCrop {
    int origin_x = 0;
    int origin_y = 0;
    ImageRaster raster;
    AnnotationSet labels;  // crop-local coordinates
};

/// `count` crops at uniform random integer origins. Boxes keep their clipped
/// part when at least `visibility` of their area falls inside the crop.
std::vector<LabeledCrop> sample_crops(const ImageRaster& image, const AnnotationSet& gt, int crop_side,
                                      int count, std::uint64_t seed, double visibility = 0.25);

/// Label-only variant: same origins and labels as sample_crops for the same
/// arguments, without copying pixels.
std::vector<LabeledCrop> sample_crop_labels(const AnnotationSet& gt, int crop_side, int count,
                                            std::uint64_t seed, double visibility = 0.25);

/// One `class cx cy w h` line per box, normalised by the tile size.
std::string to_yolo(const std::vector<BBox>& boxes, int width, int height);
std::vector<BBox> parse_yolo(const std::string& text, int width, int height);

void write_yolo_labels(const std::filesystem::path& path, const std::vector<BBox>& boxes, int width, int height);
std::vector<BBox> read_yolo_labels(const std::filesystem::path& path, int width, int height);

struct LabeledItem {
    std::string raster;
    std::string labels;
    bool operator==(const LabeledItem&) const = default;
};

enum class ItemOrigin { original, synthetic };

struct ManifestEntry {
    LabeledItem item;
    ItemOrigin origin = ItemOrigin::original;
    bool operator==(const ManifestEntry&) const = default;
};

struct MixManifest {
    std::vector<ManifestEntry> entries;
    double requested_original_percent = 100.0;
    int original_count = 0;
    int synthetic_count = 0;
};

/// Draws round(size * ratio / 100) original items and the rest synthetic,
/// without replacement, then shuffles. `size` < 0 means the original pool
/// size. Throws ValidationError naming the shortfall when a pool is too small.
MixManifest mix_datasets(const std::vector<LabeledItem>& original, const std::vector<LabeledItem>& synthetic,
                         double ratio_original_percent, std::uint64_t seed, int size = -1);

std::string manifest_to_jsonl(const MixManifest& manifest);

}  // namespace lrsaa
