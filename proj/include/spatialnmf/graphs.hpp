#pragma once

#include "spatialnmf/types.hpp"

namespace spatialnmf {

enum class GraphKind {
    contact,
    radius,
    hybrid,
    spatial_knn,
    feature_knn,
    mixed,
};

enum class EdgeWeight { unit, gaussian };

/// Weighted sparse adjacency over cells. Contact/radius/hybrid graphs are
/// symmetric; knn graphs may be directed. No self-loops.
struct SpatialGraph {
    SparseMatrix adjacency;  // n x n, weights >= 0
    GraphKind kind = GraphKind::radius;
    bool is_row_stochastic = false;

    Index size() const { return adjacency.rows(); }
};

/// Row-stochastic diffusion operator P = D^{-1}(A_s + I), where D is the
/// degree matrix of A_s + I. The identity inclusion keeps every diagonal
/// entry strictly positive, so isolated cells diffuse onto themselves.
struct DiffusionOperator {
    SparseMatrix P;  // n x n, rows sum to 1

    Index size() const { return P.rows(); }
};

/// Edge (i, j) for every pair with Euclidean distance <= r (closed ball).
/// Unit weights are 1.0; gaussian weights are exp(-(d/r)^2).
SpatialGraph radius_graph(const Matrix& coords, double r,
                          EdgeWeight weight = EdgeWeight::gaussian);

/// Short-range contact graph: radius graph with unit weights.
SpatialGraph contact_graph(const Matrix& coords, double r_c = 20.0);

/// Elementwise maximum of the two adjacencies (the contact graph dominates
/// wherever both have an edge, since contact weight is 1.0).
SpatialGraph hybrid_merge(const SpatialGraph& a_contact,
                          const SpatialGraph& a_radius);

/// Directed k-nearest-neighbor graph in coordinate space, unit weights.
/// Ties at equal distance go to the lower cell index.
SpatialGraph spatial_knn_graph(const Matrix& coords, Index k = 15);

/// kNN graph in latent space, symmetrized by elementwise max.
SpatialGraph feature_knn_graph(const Matrix& w_s, Index k_nn = 15);

DiffusionOperator diffusion_operator(const SpatialGraph& a_s);

/// Divides each nonempty row by its sum; empty rows stay empty.
SpatialGraph row_normalize(const SpatialGraph& a);

/// A_mix = alpha * A_s + (1 - alpha) * A_f, zero entries pruned, then
/// symmetrized as (A + A^T) / 2 for community detection.
SpatialGraph mix_adjacency(const SpatialGraph& a_s, const SpatialGraph& a_f,
                           double alpha = 0.5);

}  // namespace spatialnmf
