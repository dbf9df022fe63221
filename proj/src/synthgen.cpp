#include "lrsaa/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "lrsaa/error.hpp"
#include "lrsaa/formats.hpp"
#include "lrsaa/rng.hpp"
#include "lrsaa/tiling.hpp"

namespace lrsaa {

namespace {

AnnotationSet crop_labels(const AnnotationSet& gt, int x, int y, int side, double visibility) {
    AnnotationSet out;
    out.image_id = gt.image_id + "@" + std::to_string(x) + "," + std::to_string(y);
    out.image_width = side;
    out.image_height = side;
    out.classes = gt.classes;
    const BBox window{double(x), double(y), double(x) + side, double(y) + side};
    for (const auto& b : gt.boxes) {
        const double area = b.area();
        if (!(area > 0.0)) continue;
        const double inter = intersection_area(b, window);
        if (inter <= 0.0 || inter / area < visibility) continue;
        BBox local = b;
        local.x_min = std::max(b.x_min, window.x_min) - x;
        local.y_min = std::max(b.y_min, window.y_min) - y;
        local.x_max = std::min(b.x_max, window.x_max) - x;
        local.y_max = std::min(b.y_max, window.y_max) - y;
        out.boxes.push_back(local);
    }
    return out;
}

std::vector<std::pair<int, int>> crop_origins(const AnnotationSet& gt, int crop_side, int count, std::uint64_t seed) {
    if (crop_side < 1) throw ValidationError("synth: crop side must be >= 1");
    if (count < 1) throw ValidationError("synth: crop count must be >= 1");
    if (gt.image_width < crop_side || gt.image_height < crop_side)
        throw ValidationError("synth: image " + std::to_string(gt.image_width) + "x" +
                              std::to_string(gt.image_height) + " is smaller than crop side " +
                              std::to_string(crop_side));
    Rng rng(seed);
    std::vector<std::pair<int, int>> origins;
    origins.reserve(count);
    for (int i = 0; i < count; ++i) {
        const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(gt.image_width - crop_side + 1)));
        const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(gt.image_height - crop_side + 1)));
        origins.emplace_back(x, y);
    }
    return origins;
}

}  // namespace

std::vector<LabeledCrop> sample_crop_labels(const AnnotationSet& gt, int crop_side, int count, std::uint64_t seed,
                                            double visibility) {
    std::vector<LabeledCrop> crops;
    for (const auto& [x, y] : crop_origins(gt, crop_side, count, seed)) {
        LabeledCrop c;
        c.origin_x = x;
        c.origin_y = y;
        c.labels = crop_labels(gt, x, y, crop_side, visibility);
        crops.push_back(std::move(c));
    }
    return crops;
}

std::vector<LabeledCrop> sample_crops(const ImageRaster& image, const AnnotationSet& gt, int crop_side, int count,
                                      std::uint64_t seed, double visibility) {
    if (image.width != gt.image_width || image.height != gt.image_height)
        throw ValidationError("synth: raster and annotation dimensions differ");
    auto crops = sample_crop_labels(gt, crop_side, count, seed, visibility);
    for (auto& c : crops) c.raster = extract_tile(image, {0, c.origin_x, c.origin_y, crop_side, TileProvenance::poisson});
    return crops;
}

std::string to_yolo(const std::vector<BBox>& boxes, int width, int height) {
    if (width < 1 || height < 1) throw ValidationError("yolo: tile dimensions must be positive");
    std::string out;
    char line[160];
    for (const auto& b : boxes) {
        std::snprintf(line, sizeof line, "%d %.6f %.6f %.6f %.6f\n", b.class_id, b.center_x() / width,
                      b.center_y() / height, b.width() / width, b.height() / height);
        out += line;
    }
    return out;
}

std::vector<BBox> parse_yolo(const std::string& text, int width, int height) {
    std::vector<BBox> boxes;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream fields(line);
        int cls = 0;
        double cx = 0, cy = 0, w = 0, h = 0;
        if (!(fields >> cls >> cx >> cy >> w >> h) || cls < 0 || w < 0 || h < 0)
            throw ValidationError("yolo: malformed label on line " + std::to_string(line_no));
        BBox b{(cx - w / 2) * width, (cy - h / 2) * height, (cx + w / 2) * width, (cy + h / 2) * height, cls, 1.0};
        boxes.push_back(b);
    }
    return boxes;
}

void write_yolo_labels(const std::filesystem::path& path, const std::vector<BBox>& boxes, int width, int height) {
    write_text_file(path, to_yolo(boxes, width, height));
}

std::vector<BBox> read_yolo_labels(const std::filesystem::path& path, int width, int height) {
    return parse_yolo(read_text_file(path), width, height);
}

MixManifest mix_datasets(const std::vector<LabeledItem>& original, const std::vector<LabeledItem>& synthetic,
                         double ratio_original_percent, std::uint64_t seed, int size) {
    if (!(ratio_original_percent >= 0.0 && ratio_original_percent <= 100.0))
        throw ValidationError("mix: original ratio must be in [0,100] percent");
    const int total = size < 0 ? static_cast<int>(original.size()) : size;
    if (total < 1) throw ValidationError("mix: manifest size must be >= 1");

    const int want_original = static_cast<int>(std::llround(total * ratio_original_percent / 100.0));
    const int want_synthetic = total - want_original;
    if (want_original > static_cast<int>(original.size()))
        throw ValidationError("mix: need " + std::to_string(want_original) + " original items, pool has " +
                              std::to_string(original.size()) + " (short by " +
                              std::to_string(want_original - static_cast<int>(original.size())) + ")");
    if (want_synthetic > static_cast<int>(synthetic.size()))
        throw ValidationError("mix: need " + std::to_string(want_synthetic) + " synthetic items, pool has " +
                              std::to_string(synthetic.size()) + " (short by " +
                              std::to_string(want_synthetic - static_cast<int>(synthetic.size())) + ")");

    Rng rng(seed);
    // Partial Fisher-Yates: the first `want` slots become a uniform draw without replacement.
    auto draw = [&](std::size_t pool, int want) {
        std::vector<std::size_t> idx(pool);
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = 0; i < want; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(pool - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(want);
        return idx;
    };

    MixManifest m;
    m.requested_original_percent = ratio_original_percent;
    for (std::size_t i : draw(original.size(), want_original))
        m.entries.push_back({original[i], ItemOrigin::original});
    for (std::size_t i : draw(synthetic.size(), want_synthetic))
        m.entries.push_back({synthetic[i], ItemOrigin::synthetic});
    for (std::size_t i = m.entries.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(m.entries[i - 1], m.entries[j]);
    }
    m.original_count = want_original;
    m.synthetic_count = want_synthetic;
    return m;
}

std::string manifest_to_jsonl(const MixManifest& manifest) {
    std::string out;
    for (const auto& e : manifest.entries) {
        nlohmann::json j = {{"raster", e.item.raster},
                            {"labels", e.item.labels},
                            {"origin", e.origin == ItemOrigin::original ? "original" : "synthetic"}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace lrsaa
