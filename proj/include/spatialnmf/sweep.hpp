#pragma once

#include "spatialnmf/metrics.hpp"
#include "spatialnmf/pipeline.hpp"
#include "spatialnmf/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spatialnmf {

/// Grid-search recipe. Defaults are the reference grids:
/// k in {5..40 by 5}, resolution in {0.1..1.0 by 0.1, 1.2}.
struct SweepConfig {
    Method method = Method::hsnmf;
    std::vector<Index> k_grid = {5, 10, 15, 20, 25, 30, 35, 40};
    std::vector<double> rho_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6,
                                    0.7, 0.8, 0.9, 1.0, 1.2};
    double alpha = 0.5;
    double beta = 0.8;
    Index steps = 2;
    std::uint64_t seed = 0;
};

struct SweepOptions {
    int threads = 1;
    std::string resume_dir;  // per-point result files live here when set
    const MarkerSets* markers = nullptr;
};

/// One MetricReport per (k, resolution) grid point, in grid order (k outer,
/// resolution inner). The embedding is computed once per k and shared across
/// the resolution loop; each point clusters with a seed derived from
/// (seed, k, resolution). A failed point becomes an error row (metrics NaN,
/// clusters 0) and the sweep continues. One progress line per completed
/// point goes to stderr.
std::vector<MetricReport> run_sweep(const Dataset& ds, const SweepConfig& cfg,
                                    const PipelineConfig& pipeline,
                                    const SweepOptions& options = {});

/// Reports not dominated on (chaos down, Moran's I up, silhouette up, DBI
/// down): r dominates s iff r is no worse on all four and strictly better on
/// at least one. Ties are retained. Rows with NaN in any of the four
/// objectives are not comparable and are excluded. The marker metrics are
/// reported but take no part in domination.
std::vector<MetricReport> pareto_front(const std::vector<MetricReport>& reports);

/// Writes the reports as CSV sorted by (method, k, resolution), with header
/// and a trailing newline.
void export_table(const std::vector<MetricReport>& reports,
                  const std::string& path);

std::vector<MetricReport> read_table(const std::string& path);

}  // namespace spatialnmf
