#pragma once

#include "spatialnmf/types.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <utility>
#include <vector>

namespace spatialnmf::detail {

/// Uniform bucket grid over 2D points. Queries are exact: radius queries
/// check every bucket intersecting the closed ball, kNN queries expand in
/// bucket rings until the ring's minimum possible distance exceeds the
/// current k-th best. Ties resolve to the lower point index.
class BucketGrid {
public:
    BucketGrid(const Matrix& coords, double bucket_size)
        : coords_(coords), h_(bucket_size) {
        const Index n = coords.rows();
        min_x_ = coords.col(0).minCoeff();
        min_y_ = coords.col(1).minCoeff();
        nx_ = bucket_of(coords.col(0).maxCoeff(), min_x_) + 1;
        ny_ = bucket_of(coords.col(1).maxCoeff(), min_y_) + 1;
        buckets_.resize(static_cast<std::size_t>(nx_ * ny_));
        for (Index i = 0; i < n; ++i) {
            buckets_[static_cast<std::size_t>(bucket_index(i))].push_back(i);
        }
    }

    /// Bucket size heuristic: the span divided by sqrt(n).
    static double default_bucket_size(const Matrix& coords) {
        const double span_x = coords.col(0).maxCoeff() - coords.col(0).minCoeff();
        const double span_y = coords.col(1).maxCoeff() - coords.col(1).minCoeff();
        const double span = std::max({span_x, span_y, 1e-9});
        return span / std::max(1.0, std::sqrt(double(coords.rows())));
    }

    template <typename Fn>
    void for_each_within(Index i, double r, Fn&& fn) const {
        const double r2 = r * r;
        const double x = coords_(i, 0), y = coords_(i, 1);
        const Index bx = bucket_of(x, min_x_), by = bucket_of(y, min_y_);
        const Index reach = static_cast<Index>(std::ceil(r / h_));
        for (Index dx = -reach; dx <= reach; ++dx) {
            const Index cx = bx + dx;
            if (cx < 0 || cx >= nx_) continue;
            for (Index dy = -reach; dy <= reach; ++dy) {
                const Index cy = by + dy;
                if (cy < 0 || cy >= ny_) continue;
                for (Index j :
                     buckets_[static_cast<std::size_t>(cx * ny_ + cy)]) {
                    if (j == i) continue;
                    const double ddx = coords_(j, 0) - x;
                    const double ddy = coords_(j, 1) - y;
                    const double d2 = ddx * ddx + ddy * ddy;
                    if (d2 <= r2) fn(j, std::sqrt(d2));
                }
            }
        }
    }

    /// Indices of the k nearest neighbors of point i (self excluded),
    /// sorted by (distance, index).
    std::vector<Index> knn(Index i, Index k) const {
        using Cand = std::pair<double, Index>;  // (squared distance, index)
        std::priority_queue<Cand> heap;         // worst candidate on top
        const double x = coords_(i, 0), y = coords_(i, 1);
        const Index bx = bucket_of(x, min_x_), by = bucket_of(y, min_y_);
        const Index max_ring = std::max(nx_, ny_);

        auto scan = [&](Index cx, Index cy) {
            if (cx < 0 || cx >= nx_ || cy < 0 || cy >= ny_) return;
            for (Index j : buckets_[static_cast<std::size_t>(cx * ny_ + cy)]) {
                if (j == i) continue;
                const double ddx = coords_(j, 0) - x;
                const double ddy = coords_(j, 1) - y;
                const Cand c{ddx * ddx + ddy * ddy, j};
                if (static_cast<Index>(heap.size()) < k) {
                    heap.push(c);
                } else if (c < heap.top()) {
                    heap.pop();
                    heap.push(c);
                }
            }
        };

        for (Index ring = 0; ring <= max_ring; ++ring) {
            if (static_cast<Index>(heap.size()) == k && ring > 0) {
                const double ring_min = (static_cast<double>(ring) - 1.0) * h_;
                if (ring_min * ring_min > heap.top().first) break;
            }
            if (ring == 0) {
                scan(bx, by);
                continue;
            }
            for (Index dx = -ring; dx <= ring; ++dx) {
                scan(bx + dx, by - ring);
                scan(bx + dx, by + ring);
            }
            for (Index dy = -ring + 1; dy <= ring - 1; ++dy) {
                scan(bx - ring, by + dy);
                scan(bx + ring, by + dy);
            }
        }

        std::vector<Cand> sorted;
        sorted.reserve(heap.size());
        while (!heap.empty()) {
            sorted.push_back(heap.top());
            heap.pop();
        }
        std::sort(sorted.begin(), sorted.end());
        std::vector<Index> out;
        out.reserve(sorted.size());
        for (const auto& [d2, j] : sorted) out.push_back(j);
        return out;
    }

    /// Distance from point i to its nearest other point.
    double nearest_distance(Index i) const {
        const auto nn = knn(i, 1);
        const double dx = coords_(nn[0], 0) - coords_(i, 0);
        const double dy = coords_(nn[0], 1) - coords_(i, 1);
        return std::sqrt(dx * dx + dy * dy);
    }

private:
    Index bucket_of(double v, double lo) const {
        return static_cast<Index>(std::floor((v - lo) / h_));
    }

    Index bucket_index(Index i) const {
        return bucket_of(coords_(i, 0), min_x_) * ny_ +
               bucket_of(coords_(i, 1), min_y_);
    }

    const Matrix& coords_;
    double h_;
    double min_x_ = 0.0, min_y_ = 0.0;
    Index nx_ = 0, ny_ = 0;
    std::vector<std::vector<Index>> buckets_;
};

}  // namespace spatialnmf::detail
