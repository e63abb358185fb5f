#include "spatialnmf/graphs.hpp"

#include "spatialnmf/detail/bucket_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace spatialnmf {

namespace {

using detail::BucketGrid;

void require_coords(const Matrix& coords) {
    if (coords.cols() != 2) {
        throw std::invalid_argument("coords must have exactly 2 columns");
    }
}

SparseMatrix elementwise_max(const SparseMatrix& a, const SparseMatrix& b) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(a.nonZeros() + b.nonZeros()));
    for (Index i = 0; i < a.rows(); ++i) {
        SparseMatrix::InnerIterator ia(a, i), ib(b, i);
        while (ia || ib) {
            if (ia && (!ib || ia.col() < ib.col())) {
                triplets.emplace_back(i, ia.col(), ia.value());
                ++ia;
            } else if (ib && (!ia || ib.col() < ia.col())) {
                triplets.emplace_back(i, ib.col(), ib.value());
                ++ib;
            } else {
                triplets.emplace_back(i, ia.col(),
                                      std::max(ia.value(), ib.value()));
                ++ia;
                ++ib;
            }
        }
    }
    SparseMatrix m(a.rows(), a.cols());
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

}  // namespace

SpatialGraph radius_graph(const Matrix& coords, double r, EdgeWeight weight) {
    require_coords(coords);
    if (r <= 0.0) throw std::invalid_argument("radius must be positive");
    const Index n = coords.rows();
    BucketGrid grid(coords, r);
    std::vector<Eigen::Triplet<double>> triplets;
    for (Index i = 0; i < n; ++i) {
        grid.for_each_within(i, r, [&](Index j, double d) {
            const double w = weight == EdgeWeight::unit
                                 ? 1.0
                                 : std::exp(-(d / r) * (d / r));
            triplets.emplace_back(i, j, w);
        });
    }
    SpatialGraph g;
    g.adjacency = SparseMatrix(n, n);
    g.adjacency.setFromTriplets(triplets.begin(), triplets.end());
    g.adjacency.makeCompressed();
    g.kind = GraphKind::radius;
    return g;
}

SpatialGraph contact_graph(const Matrix& coords, double r_c) {
    SpatialGraph g = radius_graph(coords, r_c, EdgeWeight::unit);
    g.kind = GraphKind::contact;
    return g;
}

SpatialGraph hybrid_merge(const SpatialGraph& a_contact,
                          const SpatialGraph& a_radius) {
    if (a_contact.size() != a_radius.size()) {
        throw std::invalid_argument(
            "hybrid_merge: node counts differ (" +
            std::to_string(a_contact.size()) + " vs " +
            std::to_string(a_radius.size()) + ")");
    }
    SpatialGraph g;
    g.adjacency = elementwise_max(a_contact.adjacency, a_radius.adjacency);
    g.kind = GraphKind::hybrid;
    return g;
}

SpatialGraph spatial_knn_graph(const Matrix& coords, Index k) {
    require_coords(coords);
    const Index n = coords.rows();
    if (k < 1 || k >= n) {
        throw std::invalid_argument("spatial_knn_graph: need 1 <= k < n, got k=" +
                                    std::to_string(k) + " with n=" +
                                    std::to_string(n));
    }
    BucketGrid grid(coords, BucketGrid::default_bucket_size(coords));
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n * k));
    for (Index i = 0; i < n; ++i) {
        for (Index j : grid.knn(i, k)) triplets.emplace_back(i, j, 1.0);
    }
    SpatialGraph g;
    g.adjacency = SparseMatrix(n, n);
    g.adjacency.setFromTriplets(triplets.begin(), triplets.end());
    g.adjacency.makeCompressed();
    g.kind = GraphKind::spatial_knn;
    return g;
}

SpatialGraph feature_knn_graph(const Matrix& w_s, Index k_nn) {
    const Index n = w_s.rows();
    if (k_nn < 1 || k_nn >= n) {
        throw std::invalid_argument(
            "feature_knn_graph: need 1 <= k_nn < n, got k_nn=" +
            std::to_string(k_nn) + " with n=" + std::to_string(n));
    }
    const Vector sq = w_s.rowwise().squaredNorm();
    constexpr Index kBlock = 256;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n * k_nn));

    using Cand = std::pair<double, Index>;
    Matrix gram;
    std::vector<Cand> heap;
    for (Index start = 0; start < n; start += kBlock) {
        const Index rows = std::min(kBlock, n - start);
        gram.noalias() = w_s.middleRows(start, rows) * w_s.transpose();
        for (Index bi = 0; bi < rows; ++bi) {
            const Index i = start + bi;
            heap.clear();
            auto worse = std::less<Cand>{};  // max-heap: worst on top
            for (Index j = 0; j < n; ++j) {
                if (j == i) continue;
                const double d2 =
                    std::max(0.0, sq[i] + sq[j] - 2.0 * gram(bi, j));
                const Cand c{d2, j};
                if (static_cast<Index>(heap.size()) < k_nn) {
                    heap.push_back(c);
                    std::push_heap(heap.begin(), heap.end(), worse);
                } else if (c < heap.front()) {
                    std::pop_heap(heap.begin(), heap.end(), worse);
                    heap.back() = c;
                    std::push_heap(heap.begin(), heap.end(), worse);
                }
            }
            for (const auto& [d2, j] : heap) triplets.emplace_back(i, j, 1.0);
        }
    }

    SparseMatrix directed(n, n);
    directed.setFromTriplets(triplets.begin(), triplets.end());
    directed.makeCompressed();
    SparseMatrix transposed = SparseMatrix(directed.transpose());

    SpatialGraph g;
    g.adjacency = elementwise_max(directed, transposed);
    g.kind = GraphKind::feature_knn;
    return g;
}

DiffusionOperator diffusion_operator(const SpatialGraph& a_s) {
    const SparseMatrix& a = a_s.adjacency;
    const Index n = a.rows();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(a.nonZeros() + n));
    for (Index i = 0; i < n; ++i) {
        double degree = 1.0;  // identity inclusion
        for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
            if (it.col() == i) {
                throw std::invalid_argument(
                    "diffusion_operator: adjacency has a self-loop at node " +
                    std::to_string(i));
            }
            if (it.value() < 0.0) {
                throw std::invalid_argument(
                    "diffusion_operator: negative weight at (" +
                    std::to_string(i) + ", " + std::to_string(it.col()) + ")");
            }
            degree += it.value();
        }
        triplets.emplace_back(i, i, 1.0 / degree);
        for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
            triplets.emplace_back(i, it.col(), it.value() / degree);
        }
    }
    DiffusionOperator op;
    op.P = SparseMatrix(n, n);
    op.P.setFromTriplets(triplets.begin(), triplets.end());
    op.P.makeCompressed();
    return op;
}

SpatialGraph row_normalize(const SpatialGraph& a) {
    SpatialGraph g = a;
    for (Index i = 0; i < g.adjacency.rows(); ++i) {
        double sum = 0.0;
        for (SparseMatrix::InnerIterator it(g.adjacency, i); it; ++it) {
            if (it.value() < 0.0) {
                throw std::invalid_argument(
                    "row_normalize: negative weight at (" + std::to_string(i) +
                    ", " + std::to_string(it.col()) + ")");
            }
            sum += it.value();
        }
        if (sum <= 0.0) continue;
        for (SparseMatrix::InnerIterator it(g.adjacency, i); it; ++it) {
            it.valueRef() /= sum;
        }
    }
    g.is_row_stochastic = true;
    return g;
}

SpatialGraph mix_adjacency(const SpatialGraph& a_s, const SpatialGraph& a_f,
                           double alpha) {
    if (alpha < 0.0 || alpha > 1.0) {
        throw std::invalid_argument("mix_adjacency: alpha must be in [0, 1]");
    }
    if (a_s.size() != a_f.size()) {
        throw std::invalid_argument("mix_adjacency: node counts differ");
    }
    if (!a_s.is_row_stochastic || !a_f.is_row_stochastic) {
        throw std::invalid_argument(
            "mix_adjacency: inputs must be row-normalized first");
    }
    const Index n = a_s.size();
    // Merge rows directly so that alpha = 0 / alpha = 1 drop the other
    // graph's structure exactly instead of leaving explicit zeros.
    std::vector<Eigen::Triplet<double>> triplets;
    for (Index i = 0; i < n; ++i) {
        SparseMatrix::InnerIterator is(a_s.adjacency, i),
            iff(a_f.adjacency, i);
        while (is || iff) {
            Index col;
            double value;
            if (is && (!iff || is.col() < iff.col())) {
                col = is.col();
                value = alpha * is.value();
                ++is;
            } else if (iff && (!is || iff.col() < is.col())) {
                col = iff.col();
                value = (1.0 - alpha) * iff.value();
                ++iff;
            } else {
                col = is.col();
                value = alpha * is.value() + (1.0 - alpha) * iff.value();
                ++is;
                ++iff;
            }
            if (value != 0.0) triplets.emplace_back(i, col, value);
        }
    }
    SparseMatrix mixed(n, n);
    mixed.setFromTriplets(triplets.begin(), triplets.end());
    mixed.makeCompressed();
    SparseMatrix transposed = SparseMatrix(mixed.transpose());

    SpatialGraph g;
    g.adjacency = 0.5 * mixed + 0.5 * transposed;
    g.adjacency.makeCompressed();
    g.kind = GraphKind::mixed;
    g.is_row_stochastic = false;
    return g;
}

}  // namespace spatialnmf
