#pragma once

#include "spatialnmf/graphs.hpp"
#include "spatialnmf/leiden.hpp"
#include "spatialnmf/metrics.hpp"
#include "spatialnmf/nmf.hpp"
#include "spatialnmf/smoothing.hpp"
#include "spatialnmf/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace spatialnmf {

/// All tunables, defaulted to the reference protocol values.
struct PipelineConfig {
    double r_contact = 20.0;   // micrometers
    double r_radius = 80.0;    // micrometers
    Index knn_spatial = 15;
    Index knn_feature = 15;
    double alpha = 0.5;
    double beta = 0.8;
    Index steps = 2;
    Index nmf_max_iter = 500;
    double nmf_tol = 1e-4;
    std::uint64_t seed = 0;
    double target_sum = 10000.0;
    Index top_m = 20;
    bool morans_on_knn = false;   // Moran's I weights: hybrid (default) or spatial kNN
    bool metrics_on_raw_w = false;  // silhouette/DBI on raw W instead of W_s
};

enum class Method { nmf_plain, snmf, hsnmf };

Method parse_method(const std::string& name);
std::string method_name(Method m);

struct PipelineResult {
    FactorModel model;
    Matrix embedding;  // matrix the clustering ran on (W or W_s)
    SmoothedFactors smoothed;  // meaningful for snmf/hsnmf
    SpatialGraph hybrid;       // contact/radius max-merge, always built
    std::optional<SpatialGraph> mixed;  // hsnmf only
    ClusterLabeling labels;
};

/// Everything that depends on k but not on the Leiden resolution; the sweep
/// reuses one stage across the whole resolution grid.
struct EmbeddingStage {
    FactorModel model;
    Matrix embedding;
    SmoothedFactors smoothed;
    SpatialGraph cluster_graph;  // graph Leiden runs on at every resolution
    std::optional<SpatialGraph> mixed;
};

/// Builds the per-k part of a method: factorization, smoothing and the
/// clustering graph. `hybrid` must be the contact/radius max-merge over the
/// same cells (it does not depend on k, so callers build it once).
EmbeddingStage embed_method(const Dataset& ds, Method method, Index k,
                            const PipelineConfig& config,
                            const SpatialGraph& hybrid);

/// The contact/radius max-merge used for diffusion and Moran's I.
SpatialGraph build_hybrid_graph(const Dataset& ds,
                                const PipelineConfig& config);

/// The hSNMF chain: NMF, hybrid spatial graph, diffusion smoothing, feature
/// kNN on the smoothed factors, row-normalized dual-graph mixing, Leiden.
PipelineResult cluster_pipeline(const Dataset& ds, Index k, double resolution,
                                double alpha, const PipelineConfig& config);

/// Dispatch across the three variants. nmf_plain clusters the feature kNN
/// graph of raw W (no smoothing); snmf averages W over the spatial kNN
/// before feature-graph clustering; hsnmf is cluster_pipeline.
PipelineResult run_method(const Dataset& ds, Method method, Index k,
                          double resolution, const PipelineConfig& config);

/// One results row for a finished pipeline run. Marker metrics are NaN when
/// markers is null.
MetricReport evaluate(const Dataset& ds, const PipelineResult& result,
                      Method method, Index k, double resolution,
                      const PipelineConfig& config,
                      const MarkerSets* markers = nullptr);

}  // namespace spatialnmf
