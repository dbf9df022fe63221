#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrsaa/annotations.hpp"
#include "lrsaa/geometry.hpp"
#include "lrsaa/tiling.hpp"

namespace lrsaa {

enum class Frame { local, global };

struct DetectionSet {
    std::string detector_name;
    int tile_id = 0;
    Frame frame = Frame::local;
    std::vector<BBox> boxes;

    bool operator==(const DetectionSet&) const = default;
};

/// Maps detector scores: true objects draw from N(true_mean, true_sigma),
/// spurious boxes from N(false_mean, false_sigma), both clamped to [0,1].
struct ScoreModel {
    double true_mean = 1.0;
    double true_sigma = 0.0;
    double false_mean = 0.3;
    double false_sigma = 0.1;
};

/// Noise model of the synthetic test detector. The default-constructed
/// profile is the identity: every visible ground-truth box comes back exactly,
/// with score 1.
struct NoiseProfile {
    double jitter_sigma = 0.0;   // px, Gaussian noise on each corner
    double miss_rate = 0.0;      // probability of dropping a visible object
    double spurious_rate = 0.0;  // expected false boxes per tile
    ScoreModel score_model;
    std::uint64_t seed = 0;

    // Minimum visible fraction of an object for it to count as present.
    double visibility = 0.25;

    // Resolution-dependent misses. A tile larger than `input_side` is
    // downscaled to it before "inference"; an object whose downscaled extent
    // sqrt(w*h) falls below `min_object_px` is missed with probability rising
    // linearly from 0 (at min_object_px) to 1 (at min_object_px / 2).
    // input_side == 0 disables the effect.
    int input_side = 0;
    double min_object_px = 12.0;

    double spurious_min_px = 8.0;
    double spurious_max_px = 64.0;

    /// Score ranking structure used for realistic runs:
    /// true ~ N(0.8, 0.1), spurious ~ N(0.3, 0.1).
    static NoiseProfile realistic(std::uint64_t seed);
};

void validate(const NoiseProfile& profile);

enum class DetectorKind { plugin, synthetic };

struct DetectorSpec {
    std::string name;
    DetectorKind kind = DetectorKind::synthetic;
    std::vector<std::string> command;  // plugin only
    NoiseProfile noise;                // synthetic only
    double weight = 1.0;
};

void validate(const DetectorSpec& spec);

/// Deterministic stand-in for a trained detector: the ground truth seen
/// through `tile`, perturbed by `profile`. The random stream depends only on
/// (profile.seed, tile origin, tile side), never on processing order.
DetectionSet synthetic_detect(const AnnotationSet& gt, const Tile& tile, const NoiseProfile& profile,
                              const std::string& detector_name = "synthetic");

/// Throws ProtocolError naming the tile when a local-frame box leaves
/// [0, side]^2 or a score leaves [0,1].
void check_local_bounds(const DetectionSet& set, int side);

struct TileRequest {
    int tile_id = 0;
    int side = 0;
    std::filesystem::path raster;
};

/// Runs one plugin process over a batch of tiles.
///
/// Requests go to the plugin's stdin as newline-delimited JSON
///   {"tile_id":int,"side":int,"raster":"path"}
/// and one response per tile is read from stdout
///   {"tile_id":int,"detections":[{"x_min":f,"y_min":f,"x_max":f,"y_max":f,"class_id":int,"score":f}]}
/// Responses may arrive in any order. The result is ordered like `tiles`.
///
/// A command without a '/' is looked up in LRSAA_PLUGIN_PATH, then PATH.
/// Throws PluginError when the process cannot start or exits non-zero and
/// ProtocolError on malformed, out-of-bounds, duplicate, unknown or missing
/// responses.
std::vector<DetectionSet> run_plugin(const DetectorSpec& spec, const std::vector<TileRequest>& tiles);

}  // namespace lrsaa
