#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lrsaa/geometry.hpp"
#include "lrsaa/poisson.hpp"
#include "lrsaa/raster.hpp"

namespace lrsaa {

enum class TileProvenance { poisson, fallback };

const char* to_string(TileProvenance p) noexcept;
TileProvenance provenance_from_string(const std::string& s);

/// Square crop of the source image. The origin is the global top-left corner.
struct Tile {
    int tile_id = 0;
    int origin_x = 0;
    int origin_y = 0;
    int side = 0;
    TileProvenance provenance = TileProvenance::poisson;

    bool operator==(const Tile&) const = default;
};

struct TilePlan {
    int image_width = 0;
    int image_height = 0;
    int side = 0;
    double r = 0.0;
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<Tile> tiles;
    double coverage_fraction = 0.0;

    bool operator==(const TilePlan&) const = default;
};

struct PlanResult {
    TilePlan plan;
    // Poisson samples the tiles were centred on, in sampling order.
    std::vector<Point2> points;
};

/// Poisson-disk tile planning.
///
/// 1. Sample Poisson points over the image rectangle.
/// 2. Centre a side x side tile on each point, round the origin to the nearest
///    pixel and clamp it so the tile lies inside the image. An image smaller
///    than the tile along an axis gets origin 0 on that axis (padded tile).
/// 3. Drop tiles whose origin repeats an earlier tile.
/// 4. Walk a regular grid of stride `side`; every grid cell not fully covered
///    by the current tiles receives a fallback tile (clamped like the rest).
///
/// The grid pass guarantees coverage_fraction == 1.
PlanResult plan_tiles_with_points(int image_width, int image_height, int side, double r, int k,
                                  std::uint64_t seed);

TilePlan plan_tiles(int image_width, int image_height, int side, double r, int k, std::uint64_t seed);

/// Exact fraction of image pixels covered by at least one tile.
double coverage_fraction(const TilePlan& plan);

/// Maps a tile-local box into the global frame by adding the tile origin.
/// Throws ValidationError if the box leaves [0, side]^2.
BBox remap_to_global(const BBox& local, const Tile& tile);

/// Inverse translation. No bounds check.
BBox remap_to_local(const BBox& global, const Tile& tile);

/// side x side crop. Pixels outside the source image are zero.
ImageRaster extract_tile(const ImageRaster& raster, const Tile& tile);

/// Intersection of the box with [0,w] x [0,h]; nullopt when the intersection
/// has zero area.
std::optional<BBox> clip_to_image(const BBox& box, double image_width, double image_height);

/// True when the global box touches (within `margin`) a tile edge that is not
/// also an image border, i.e. the object may continue outside the tile.
bool touches_interior_edge(const BBox& global, const Tile& tile, int image_width, int image_height,
                           double margin);

}  // namespace lrsaa
