#include "lrsaa/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "lrsaa/error.hpp"

namespace lrsaa {

namespace {

// Uniform grid over box extents in CSR layout. A box is registered in every
// cell its closed extent touches, so two boxes with a positive-area overlap
// always share at least one cell.
class BoxGrid {
public:
    explicit BoxGrid(const std::vector<BBox>& boxes, const std::vector<int>& members) : boxes_(boxes) {
        if (members.empty()) return;
        double min_x = boxes[members[0]].x_min, min_y = boxes[members[0]].y_min;
        double max_x = boxes[members[0]].x_max, max_y = boxes[members[0]].y_max;
        std::vector<double> extents;
        extents.reserve(members.size());
        for (int i : members) {
            const auto& b = boxes[i];
            min_x = std::min(min_x, b.x_min);
            min_y = std::min(min_y, b.y_min);
            max_x = std::max(max_x, b.x_max);
            max_y = std::max(max_y, b.y_max);
            extents.push_back(std::max(b.width(), b.height()));
        }
        const auto mid = extents.begin() + static_cast<std::ptrdiff_t>(extents.size() / 2);
        std::nth_element(extents.begin(), mid, extents.end());
        cell_ = std::max(*mid, 1e-6);
        // Keep the cell count proportional to the number of boxes.
        const double span_x = std::max(max_x - min_x, cell_), span_y = std::max(max_y - min_y, cell_);
        const double limit = 4.0 * static_cast<double>(members.size()) + 16.0;
        while ((span_x / cell_ + 1.0) * (span_y / cell_ + 1.0) > limit) cell_ *= 2.0;
        origin_x_ = min_x;
        origin_y_ = min_y;
        cols_ = static_cast<long>(span_x / cell_) + 1;
        rows_ = static_cast<long>(span_y / cell_) + 1;

        start_.assign(static_cast<std::size_t>(cols_ * rows_) + 1, 0);
        for (int i : members) for_cells(boxes[i], [&](std::size_t c) { ++start_[c + 1]; });
        std::partial_sum(start_.begin(), start_.end(), start_.begin());
        items_.resize(start_.back());
        std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
        for (int i : members) for_cells(boxes[i], [&](std::size_t c) { items_[fill[c]++] = i; });
        stamp_.assign(boxes.size(), 0);
    }

    // Calls fn(j) once for each registered box sharing a cell with `query`.
    template <typename Fn>
    void visit(const BBox& query, Fn&& fn) {
        if (items_.empty()) return;
        ++epoch_;
        for_cells(query, [&](std::size_t c) {
            for (std::size_t k = start_[c]; k < start_[c + 1]; ++k) {
                const int j = items_[k];
                if (stamp_[j] == epoch_) continue;
                stamp_[j] = epoch_;
                fn(j);
            }
        });
    }

private:
    long cell_of(double v, double origin, long count) const {
        const long c = static_cast<long>(std::floor((v - origin) / cell_));
        return std::clamp(c, 0L, count - 1);
    }

    template <typename Fn>
    void for_cells(const BBox& b, Fn&& fn) const {
        const long x0 = cell_of(b.x_min, origin_x_, cols_), x1 = cell_of(b.x_max, origin_x_, cols_);
        const long y0 = cell_of(b.y_min, origin_y_, rows_), y1 = cell_of(b.y_max, origin_y_, rows_);
        for (long y = y0; y <= y1; ++y)
            for (long x = x0; x <= x1; ++x) fn(static_cast<std::size_t>(y * cols_ + x));
    }

    const std::vector<BBox>& boxes_;
    double cell_ = 1.0;
    double origin_x_ = 0.0, origin_y_ = 0.0;
    long cols_ = 1, rows_ = 1;
    std::vector<std::size_t> start_;
    std::vector<int> items_;
    std::vector<unsigned> stamp_;
    unsigned epoch_ = 0;
};

bool same_group(const BBox& a, const BBox& b, const FusionConfig& config) {
    return config.class_agnostic || a.class_id == b.class_id;
}

// Ranking used by both NMS implementations.
struct RankKey {
    const std::vector<BBox>& boxes;
    const std::vector<double>& centrality;
    bool operator()(int a, int b) const {
        const BBox& p = boxes[a];
        const BBox& q = boxes[b];
        if (p.score != q.score) return p.score > q.score;
        if (centrality[a] != centrality[b]) return centrality[a] < centrality[b];
        if (p.x_min != q.x_min) return p.x_min < q.x_min;
        if (p.y_min != q.y_min) return p.y_min < q.y_min;
        if (p.x_max != q.x_max) return p.x_max < q.x_max;
        if (p.y_max != q.y_max) return p.y_max < q.y_max;
        if (p.class_id != q.class_id) return p.class_id < q.class_id;
        return a < b;
    }
};

BBox fuse_cluster(const std::vector<BBox>& boxes, std::vector<int> cluster, const std::vector<int>& rank) {
    std::sort(cluster.begin(), cluster.end(), [&](int a, int b) { return rank[a] < rank[b]; });
    BBox out = boxes[cluster.front()];
    double wsum = 0.0;
    for (int i : cluster) wsum += boxes[i].score;
    const bool uniform = !(wsum > 0.0);
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    for (int i : cluster) {
        const double w = uniform ? 1.0 : boxes[i].score;
        x0 += w * boxes[i].x_min;
        y0 += w * boxes[i].y_min;
        x1 += w * boxes[i].x_max;
        y1 += w * boxes[i].y_max;
    }
    const double norm = uniform ? static_cast<double>(cluster.size()) : wsum;
    out.x_min = x0 / norm;
    out.y_min = y0 / norm;
    out.x_max = std::max(out.x_min, x1 / norm);
    out.y_max = std::max(out.y_min, y1 / norm);
    return out;
}

void validate_inputs(const std::vector<BBox>& boxes, const FusionConfig& config) {
    validate(config);
    for (std::size_t i = 0; i < boxes.size(); ++i) validate(boxes[i], "nms input " + std::to_string(i));
}

}  // namespace

void validate(const FusionConfig& c) {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(c.score_threshold)) throw ValidationError("fusion: score_threshold must be in [0,1]");
    if (!unit(c.suppression_iou)) throw ValidationError("fusion: suppression_iou must be in [0,1]");
    if (!unit(c.truncation_ios)) throw ValidationError("fusion: truncation_ios must be in [0,1]");
    if (!unit(c.stitch_iou)) throw ValidationError("fusion: stitch_iou must be in [0,1]");
    if (!std::isfinite(c.border_margin)) throw ValidationError("fusion: border_margin must be finite");
}

FusedSet eiou_nms(const std::vector<BBox>& boxes, const FusionConfig& config) {
    validate_inputs(boxes, config);
    const int n = static_cast<int>(boxes.size());
    FusedSet out;
    if (n == 0) return out;

    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    BoxGrid grid(boxes, all);

    std::vector<double> centrality(n, 0.0);
    if (config.eiou_rescoring) {
        std::vector<int> peers;
        for (int i = 0; i < n; ++i) {
            peers.clear();
            grid.visit(boxes[i], [&](int j) {
                if (j != i && boxes[j].score == boxes[i].score && same_group(boxes[i], boxes[j], config) &&
                    intersection_area(boxes[i], boxes[j]) > 0.0)
                    peers.push_back(j);
            });
            if (peers.empty()) continue;
            std::sort(peers.begin(), peers.end());
            double sum = 0.0;
            for (int j : peers) sum += eiou_loss(boxes[i], boxes[j]);
            centrality[i] = sum / static_cast<double>(peers.size());
        }
    }

    std::vector<int> order = all;
    std::sort(order.begin(), order.end(), RankKey{boxes, centrality});
    std::vector<int> rank(n);
    for (int p = 0; p < n; ++p) rank[order[p]] = p;

    std::vector<char> removed(n, 0);
    std::vector<int> cluster;
    for (int i : order) {
        if (removed[i]) continue;
        cluster.assign(1, i);
        grid.visit(boxes[i], [&](int j) {
            if (removed[j] || rank[j] <= rank[i] || !same_group(boxes[i], boxes[j], config)) return;
            if (iou(boxes[i], boxes[j]) > config.suppression_iou) {
                removed[j] = 1;
                cluster.push_back(j);
            }
        });
        out.boxes.push_back(config.fuse_coordinates ? fuse_cluster(boxes, cluster, rank) : boxes[i]);
        out.source_count.push_back(static_cast<int>(cluster.size()));
    }
    return out;
}

FusedSet reference_nms(const std::vector<BBox>& boxes, const FusionConfig& config) {
    validate_inputs(boxes, config);
    const int n = static_cast<int>(boxes.size());

    std::vector<double> centrality(n, 0.0);
    if (config.eiou_rescoring) {
        for (int i = 0; i < n; ++i) {
            double sum = 0.0;
            int count = 0;
            for (int j = 0; j < n; ++j) {
                if (j == i || boxes[j].score != boxes[i].score || !same_group(boxes[i], boxes[j], config)) continue;
                if (intersection_area(boxes[i], boxes[j]) > 0.0) {
                    sum += eiou_loss(boxes[i], boxes[j]);
                    ++count;
                }
            }
            if (count > 0) centrality[i] = sum / count;
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), RankKey{boxes, centrality});
    std::vector<int> rank(n);
    for (int p = 0; p < n; ++p) rank[order[p]] = p;

    FusedSet out;
    std::vector<char> alive(n, 1);
    for (int p = 0; p < n; ++p) {
        const int i = order[p];
        if (!alive[i]) continue;
        std::vector<int> cluster{i};
        for (int q = p + 1; q < n; ++q) {
            const int j = order[q];
            if (alive[j] && same_group(boxes[i], boxes[j], config) && iou(boxes[i], boxes[j]) > config.suppression_iou) {
                alive[j] = 0;
                cluster.push_back(j);
            }
        }
        out.boxes.push_back(config.fuse_coordinates ? fuse_cluster(boxes, cluster, rank) : boxes[i]);
        out.source_count.push_back(static_cast<int>(cluster.size()));
    }
    return out;
}

FusedSet ensemble_merge(const std::vector<DetectorOutput>& per_detector, const FusionConfig& config,
                        const TilePlan* plan) {
    validate(config);

    std::vector<BBox> pooled;
    std::vector<int> tile_of;
    for (const auto& det : per_detector) {
        validate(det.spec);
        for (const auto& set : det.sets) {
            if (set.frame != Frame::global)
                throw ValidationError("ensemble_merge: detector '" + det.spec.name + "' tile " +
                                      std::to_string(set.tile_id) + " is in the local frame");
            for (const auto& b : set.boxes) {
                validate(b, "detector '" + det.spec.name + "' tile " + std::to_string(set.tile_id));
                BBox w = b;
                w.score = std::clamp(b.score * det.spec.weight, 0.0, 1.0);
                if (w.score < config.score_threshold) continue;
                pooled.push_back(w);
                tile_of.push_back(set.tile_id);
            }
        }
    }

    if (plan && config.border_margin >= 0.0 && !pooled.empty()) {
        std::unordered_map<int, const Tile*> tiles;
        for (const auto& t : plan->tiles) tiles[t.tile_id] = &t;

        const int n = static_cast<int>(pooled.size());
        std::vector<char> truncated(n, 0);
        std::vector<int> whole;
        for (int i = 0; i < n; ++i) {
            auto it = tiles.find(tile_of[i]);
            if (it == tiles.end())
                throw ValidationError("ensemble_merge: tile " + std::to_string(tile_of[i]) + " not in plan");
            truncated[i] = touches_interior_edge(pooled[i], *it->second, plan->image_width, plan->image_height,
                                                 config.border_margin);
            if (!truncated[i]) whole.push_back(i);
        }

        BoxGrid grid(pooled, whole);
        std::vector<int> fragments;  // truncated and not covered
        std::vector<char> drop(n, 0);
        for (int i = 0; i < n; ++i) {
            if (!truncated[i]) continue;
            bool covered = false;
            const BBox& b = pooled[i];
            const double area = b.area();
            grid.visit(b, [&](int j) {
                if (covered || !same_group(b, pooled[j], config)) return;
                const double inter = intersection_area(b, pooled[j]);
                const bool contained = b.x_min >= pooled[j].x_min && b.x_max <= pooled[j].x_max &&
                                       b.y_min >= pooled[j].y_min && b.y_max <= pooled[j].y_max;
                const double ios = area > 0.0 ? inter / area : (contained ? 1.0 : 0.0);
                if (ios >= config.truncation_ios) covered = true;
            });
            if (covered) drop[i] = 1;
            else fragments.push_back(i);
        }

        // Stitch fragments of objects that no tile sees whole: two fragments
        // from different tiles join when they agree inside the tiles' shared
        // window. Each joined group becomes its enclosing box.
        std::vector<int> parent(n);
        std::iota(parent.begin(), parent.end(), 0);
        const auto find = [&](int i) {
            while (parent[i] != i) i = parent[i] = parent[parent[i]];
            return i;
        };
        BoxGrid frag_grid(pooled, fragments);
        for (int i : fragments) {
            const Tile& ti = *tiles.at(tile_of[i]);
            frag_grid.visit(pooled[i], [&](int j) {
                if (j <= i || tile_of[j] == tile_of[i] || !same_group(pooled[i], pooled[j], config)) return;
                const Tile& tj = *tiles.at(tile_of[j]);
                const BBox shared{double(std::max(ti.origin_x, tj.origin_x)), double(std::max(ti.origin_y, tj.origin_y)),
                                  double(std::min(ti.origin_x + ti.side, tj.origin_x + tj.side)),
                                  double(std::min(ti.origin_y + ti.side, tj.origin_y + tj.side))};
                if (shared.x_max <= shared.x_min || shared.y_max <= shared.y_min) return;
                const auto clip = [&](const BBox& b) {
                    BBox c = b;
                    c.x_min = std::clamp(b.x_min, shared.x_min, shared.x_max);
                    c.x_max = std::clamp(b.x_max, shared.x_min, shared.x_max);
                    c.y_min = std::clamp(b.y_min, shared.y_min, shared.y_max);
                    c.y_max = std::clamp(b.y_max, shared.y_min, shared.y_max);
                    return c;
                };
                const BBox a = clip(pooled[i]), b = clip(pooled[j]);
                if (a.area() <= 0.0 || b.area() <= 0.0 || iou(a, b) <= config.stitch_iou) return;
                const int ri = find(i), rj = find(j);
                if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
            });
        }

        std::vector<BBox> kept;
        kept.reserve(pooled.size());
        std::unordered_map<int, std::size_t> slot;  // group root -> index in kept
        for (int i = 0; i < n; ++i) {
            if (drop[i]) continue;
            if (!truncated[i]) {
                kept.push_back(pooled[i]);
                continue;
            }
            const int root = find(i);
            auto [it, fresh] = slot.emplace(root, kept.size());
            if (fresh) {
                kept.push_back(pooled[i]);
                continue;
            }
            BBox& g = kept[it->second];
            const double score = std::max(g.score, pooled[i].score);
            g = enclosing_box(g, pooled[i]);
            g.score = score;
        }
        pooled = std::move(kept);
    }

    return eiou_nms(pooled, config);
}

}  // namespace lrsaa
