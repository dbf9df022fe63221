#include "lrsaa/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <utility>

#include "lrsaa/error.hpp"

namespace lrsaa {

namespace {

struct IntRect {
    std::int64_t x0, y0, x1, y1;  // half-open
};

IntRect tile_rect_in_image(const Tile& t, int w, int h) {
    return {t.origin_x, t.origin_y, std::min<std::int64_t>(t.origin_x + t.side, w),
            std::min<std::int64_t>(t.origin_y + t.side, h)};
}

// Exact area of the union of `rects` restricted to `window`.
std::int64_t covered_area(const std::vector<IntRect>& rects, const IntRect& window) {
    std::vector<IntRect> clipped;
    std::vector<std::int64_t> xs{window.x0, window.x1};
    for (const auto& r : rects) {
        IntRect c{std::max(r.x0, window.x0), std::max(r.y0, window.y0), std::min(r.x1, window.x1),
                  std::min(r.y1, window.y1)};
        if (c.x0 >= c.x1 || c.y0 >= c.y1) continue;
        clipped.push_back(c);
        xs.push_back(c.x0);
        xs.push_back(c.x1);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    std::int64_t area = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const std::int64_t a = xs[i], b = xs[i + 1];
        spans.clear();
        for (const auto& c : clipped)
            if (c.x0 <= a && c.x1 >= b) spans.emplace_back(c.y0, c.y1);
        std::sort(spans.begin(), spans.end());
        std::int64_t covered = 0, cur0 = 0, cur1 = 0;
        bool open = false;
        for (const auto& [s0, s1] : spans) {
            if (!open || s0 > cur1) {
                if (open) covered += cur1 - cur0;
                cur0 = s0;
                cur1 = s1;
                open = true;
            } else {
                cur1 = std::max(cur1, s1);
            }
        }
        if (open) covered += cur1 - cur0;
        area += covered * (b - a);
    }
    return area;
}

int clamp_origin(long long origin, int image_extent, int side) {
    const int hi = std::max(0, image_extent - side);
    return static_cast<int>(std::clamp<long long>(origin, 0, hi));
}

}  // namespace

const char* to_string(TileProvenance p) noexcept {
    return p == TileProvenance::poisson ? "poisson" : "fallback";
}

TileProvenance provenance_from_string(const std::string& s) {
    if (s == "poisson") return TileProvenance::poisson;
    if (s == "fallback") return TileProvenance::fallback;
    throw ValidationError("unknown tile provenance '" + s + "'");
}

PlanResult plan_tiles_with_points(int image_width, int image_height, int side, double r, int k,
                                  std::uint64_t seed) {
    if (image_width < 1 || image_height < 1)
        throw ValidationError("plan: image dimensions must be >= 1, got " + std::to_string(image_width) + "x" +
                              std::to_string(image_height));
    if (side < 1) throw ValidationError("plan: tile side must be >= 1");
    if (!(r > 0.0)) throw ValidationError("plan: poisson radius must be positive");

    PlanResult result;
    TilePlan& plan = result.plan;
    plan.image_width = image_width;
    plan.image_height = image_height;
    plan.side = side;
    plan.r = r;
    plan.k = k;
    plan.seed = seed;

    result.points = sample_poisson({double(image_width), double(image_height)}, r, k, seed).points;

    std::set<std::pair<int, int>> seen;
    auto add_tile = [&](int x, int y, TileProvenance prov) {
        if (!seen.emplace(x, y).second) return false;
        plan.tiles.push_back({static_cast<int>(plan.tiles.size()), x, y, side, prov});
        return true;
    };

    const double half = side / 2.0;
    for (const auto& p : result.points) {
        const int x = clamp_origin(std::llround(p.x - half), image_width, side);
        const int y = clamp_origin(std::llround(p.y - half), image_height, side);
        add_tile(x, y, TileProvenance::poisson);
    }

    std::vector<IntRect> rects;
    rects.reserve(plan.tiles.size());
    for (const auto& t : plan.tiles) rects.push_back(tile_rect_in_image(t, image_width, image_height));

    for (std::int64_t gy = 0; gy < image_height; gy += side) {
        for (std::int64_t gx = 0; gx < image_width; gx += side) {
            const IntRect cell{gx, gy, std::min<std::int64_t>(gx + side, image_width),
                               std::min<std::int64_t>(gy + side, image_height)};
            const std::int64_t need = (cell.x1 - cell.x0) * (cell.y1 - cell.y0);
            if (covered_area(rects, cell) == need) continue;
            const int x = clamp_origin(gx, image_width, side);
            const int y = clamp_origin(gy, image_height, side);
            if (add_tile(x, y, TileProvenance::fallback))
                rects.push_back(tile_rect_in_image(plan.tiles.back(), image_width, image_height));
        }
    }

    plan.coverage_fraction = coverage_fraction(plan);
    return result;
}

TilePlan plan_tiles(int image_width, int image_height, int side, double r, int k, std::uint64_t seed) {
    return plan_tiles_with_points(image_width, image_height, side, r, k, seed).plan;
}

double coverage_fraction(const TilePlan& plan) {
    if (plan.image_width < 1 || plan.image_height < 1) return 0.0;
    std::vector<IntRect> rects;
    rects.reserve(plan.tiles.size());
    for (const auto& t : plan.tiles) rects.push_back(tile_rect_in_image(t, plan.image_width, plan.image_height));
    const IntRect image{0, 0, plan.image_width, plan.image_height};
    const std::int64_t total = std::int64_t{plan.image_width} * plan.image_height;
    const std::int64_t covered = covered_area(rects, image);
    if (covered == total) return 1.0;
    return static_cast<double>(covered) / static_cast<double>(total);
}

BBox remap_to_global(const BBox& local, const Tile& tile) {
    validate(local, "tile " + std::to_string(tile.tile_id) + " detection");
    if (local.x_min < 0.0 || local.y_min < 0.0 || local.x_max > tile.side || local.y_max > tile.side)
        throw ValidationError("tile " + std::to_string(tile.tile_id) + ": local box outside [0, " +
                              std::to_string(tile.side) + "]^2");
    BBox g = local;
    g.x_min += tile.origin_x;
    g.y_min += tile.origin_y;
    g.x_max += tile.origin_x;
    g.y_max += tile.origin_y;
    return g;
}

BBox remap_to_local(const BBox& global, const Tile& tile) {
    BBox l = global;
    l.x_min -= tile.origin_x;
    l.y_min -= tile.origin_y;
    l.x_max -= tile.origin_x;
    l.y_max -= tile.origin_y;
    return l;
}

ImageRaster extract_tile(const ImageRaster& raster, const Tile& tile) {
    ImageRaster out(tile.side, tile.side, raster.channels);
    const int x0 = std::max(0, tile.origin_x);
    const int y0 = std::max(0, tile.origin_y);
    const int x1 = std::min(raster.width, tile.origin_x + tile.side);
    const int y1 = std::min(raster.height, tile.origin_y + tile.side);
    if (x0 >= x1 || y0 >= y1) return out;
    const std::size_t bytes = static_cast<std::size_t>(x1 - x0) * raster.channels;
    for (int y = y0; y < y1; ++y) {
        const std::uint8_t* src = raster.row(y) + static_cast<std::size_t>(x0) * raster.channels;
        std::uint8_t* dst = out.row(y - tile.origin_y) + static_cast<std::size_t>(x0 - tile.origin_x) * raster.channels;
        std::memcpy(dst, src, bytes);
    }
    return out;
}

std::optional<BBox> clip_to_image(const BBox& box, double image_width, double image_height) {
    BBox c = box;
    c.x_min = std::max(box.x_min, 0.0);
    c.y_min = std::max(box.y_min, 0.0);
    c.x_max = std::min(box.x_max, image_width);
    c.y_max = std::min(box.y_max, image_height);
    if (!(c.x_max > c.x_min) || !(c.y_max > c.y_min)) return std::nullopt;
    return c;
}

bool touches_interior_edge(const BBox& b, const Tile& t, int image_width, int image_height, double margin) {
    const double left = t.origin_x, top = t.origin_y;
    const double right = double(t.origin_x) + t.side, bottom = double(t.origin_y) + t.side;
    if (t.origin_x > 0 && b.x_min <= left + margin) return true;
    if (t.origin_y > 0 && b.y_min <= top + margin) return true;
    if (right < image_width && b.x_max >= right - margin) return true;
    if (bottom < image_height && b.y_max >= bottom - margin) return true;
    return false;
}

}  // namespace lrsaa
