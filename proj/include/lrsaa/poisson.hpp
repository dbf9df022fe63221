#pragma once

#include <cstdint>
#include <vector>

namespace lrsaa {

struct SampleDomain {
    double width = 0.0;
    double height = 0.0;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point2&) const = default;
};

struct PointSet {
    std::vector<Point2> points;
    double r = 0.0;
    std::uint64_t seed = 0;
};

inline constexpr int kDefaultPoissonAttempts = 30;

/// Bridson's dart throwing over [0,width] x [0,height].
///
/// The background grid has cell side r/sqrt(2), so a cell holds at most one
/// sample and a candidate only needs the 5x5 cell neighbourhood checked.
/// Candidates are drawn area-uniformly from the annulus [r, 2r) around a
/// random active sample; a sample retires after k rejected candidates.
/// The first point is uniform over the domain.
///
/// Maximality is not guaranteed for finite k.
PointSet sample_poisson(const SampleDomain& domain, double r, int k, std::uint64_t seed);

/// Brute-force O(n^2) check that every pair is at least `r` apart.
bool verify_min_distance(const PointSet& set);

}  // namespace lrsaa
