#include "lrsaa/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lrsaa/error.hpp"
#include "lrsaa/rng.hpp"

namespace lrsaa {

namespace {

class BackgroundGrid {
public:
    BackgroundGrid(const SampleDomain& domain, double r)
        : cell_(r / std::numbers::sqrt2),
          cols_(std::max<long>(1, static_cast<long>(std::ceil(domain.width / cell_)))),
          rows_(std::max<long>(1, static_cast<long>(std::ceil(domain.height / cell_)))),
          r2_(r * r),
          slots_(static_cast<std::size_t>(cols_ * rows_), kEmpty) {}

    long col_of(double x) const { return std::min(cols_ - 1, static_cast<long>(x / cell_)); }
    long row_of(double y) const { return std::min(rows_ - 1, static_cast<long>(y / cell_)); }

    bool accepts(const Point2& p, const std::vector<Point2>& points) const {
        const long c = col_of(p.x);
        const long rw = row_of(p.y);
        for (long y = std::max(0L, rw - 2); y <= std::min(rows_ - 1, rw + 2); ++y) {
            for (long x = std::max(0L, c - 2); x <= std::min(cols_ - 1, c + 2); ++x) {
                const std::size_t slot = slots_[static_cast<std::size_t>(y * cols_ + x)];
                if (slot == kEmpty) continue;
                const double dx = points[slot].x - p.x;
                const double dy = points[slot].y - p.y;
                if (dx * dx + dy * dy < r2_) return false;
            }
        }
        return true;
    }

    void insert(const Point2& p, std::size_t index) {
        slots_[static_cast<std::size_t>(row_of(p.y) * cols_ + col_of(p.x))] = index;
    }

private:
    static constexpr std::size_t kEmpty = std::numeric_limits<std::size_t>::max();
    double cell_;
    long cols_;
    long rows_;
    double r2_;
    std::vector<std::size_t> slots_;
};

}  // namespace

PointSet sample_poisson(const SampleDomain& domain, double r, int k, std::uint64_t seed) {
    if (!(domain.width > 0.0) || !(domain.height > 0.0) || !std::isfinite(domain.width) ||
        !std::isfinite(domain.height))
        throw ValidationError("poisson: domain dimensions must be positive");
    if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("poisson: radius must be positive");
    if (k < 1) throw ValidationError("poisson: attempt count k must be >= 1");

    const double cells = std::ceil(domain.width / (r / std::numbers::sqrt2)) *
                         std::ceil(domain.height / (r / std::numbers::sqrt2));
    if (cells > 4.0e8) throw ValidationError("poisson: radius too small for the domain");

    PointSet out;
    out.r = r;
    out.seed = seed;

    Rng rng(seed);
    BackgroundGrid grid(domain, r);
    std::vector<std::size_t> active;

    auto add = [&](const Point2& p) {
        grid.insert(p, out.points.size());
        active.push_back(out.points.size());
        out.points.push_back(p);
    };

    add({rng.uniform() * domain.width, rng.uniform() * domain.height});

    while (!active.empty()) {
        const std::size_t slot = static_cast<std::size_t>(rng.below(active.size()));
        const Point2 base = out.points[active[slot]];
        bool placed = false;
        for (int attempt = 0; attempt < k; ++attempt) {
            const double angle = 2.0 * std::numbers::pi * rng.uniform();
            // Area-uniform radius in [r, 2r).
            const double dist = r * std::sqrt(1.0 + 3.0 * rng.uniform());
            const Point2 candidate{base.x + dist * std::cos(angle), base.y + dist * std::sin(angle)};
            if (candidate.x < 0.0 || candidate.x >= domain.width || candidate.y < 0.0 ||
                candidate.y >= domain.height)
                continue;
            if (!grid.accepts(candidate, out.points)) continue;
            add(candidate);
            placed = true;
            break;
        }
        if (!placed) {
            active[slot] = active.back();
            active.pop_back();
        }
    }
    return out;
}

bool verify_min_distance(const PointSet& set) {
    // Sweep over x-sorted points; pairs with |dx| >= r cannot violate.
    std::vector<Point2> pts = set.points;
    std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x; });
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size() && pts[j].x - pts[i].x < set.r; ++j) {
            if (std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y) < set.r) return false;
        }
    }
    return true;
}

}  // namespace lrsaa
