#pragma once

#include "spatialnmf/graphs.hpp"
#include "spatialnmf/types.hpp"

#include <cstdint>
#include <vector>

namespace spatialnmf {

/// Per-cell community assignment. Labels are 0-based and contiguous,
/// numbered by first appearance in cell order.
struct ClusterLabeling {
    std::vector<int> labels;
    double resolution = 1.0;
    std::uint64_t seed = 0;
    int n_clusters = 0;
};

/// Leiden community detection (local moving, refinement, aggregation) on a
/// symmetric nonnegative graph without self-loops, maximizing
/// resolution-parameterized modularity
///   Q(gamma) = (1/2m) sum_ij [A_ij - gamma k_i k_j / 2m] delta(c_i, c_j).
/// Every returned community induces a connected subgraph. Deterministic for
/// a fixed seed. A graph with zero total weight yields all singletons.
/// If quality_trace is given, Q is appended once per pass.
ClusterLabeling leiden(const SpatialGraph& a, double resolution,
                       std::uint64_t seed, int max_passes = 10,
                       std::vector<double>* quality_trace = nullptr);

/// Q(gamma) for an explicit labeling; 0 on a zero-weight graph.
double modularity(const SpatialGraph& a, const std::vector<int>& labels,
                  double resolution);

}  // namespace spatialnmf
