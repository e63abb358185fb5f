#pragma once

#include "spatialnmf/graphs.hpp"
#include "spatialnmf/leiden.hpp"
#include "spatialnmf/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace spatialnmf {

/// Curated marker genes per cell type. Loaded from TSV `cell_type<TAB>gene`;
/// marker genes absent from a dataset are dropped with a warning at
/// validation time.
struct MarkerSets {
    std::map<std::string, std::vector<std::string>> sets;

    bool empty() const { return sets.empty(); }
};

MarkerSets load_markers(const std::string& path);
void write_markers(const std::string& path, const MarkerSets& markers);

/// Drops marker genes missing from gene_names (warning per gene) and marker
/// sets left empty. Throws if nothing survives.
MarkerSets validate_markers(const MarkerSets& markers,
                            const std::vector<std::string>& gene_names);

/// One row of the results table.
struct MetricReport {
    std::string method;
    Index k = 0;
    double resolution = 0.0;
    Index n_clusters = 0;
    double chaos = 0.0;
    double morans_i = 0.0;
    double silhouette = 0.0;
    double dbi = 0.0;
    double cmc = 0.0;
    double mer = 0.0;
    double enrichment = 0.0;
};

/// Spatial compactness: coordinates are standardized per axis (zero mean,
/// unit population variance; a constant axis maps to zero), then the mean
/// over all N cells of the distance to the nearest same-cluster neighbor.
/// Singleton clusters contribute 0 to the sum but still count in N, which
/// slightly rewards over-fragmentation.
double chaos(const Matrix& coords, const ClusterLabeling& labels);

/// Moran's I of y under the weight matrix of G.
double morans_i(const Vector& y, const SpatialGraph& g);

/// Mean silhouette coefficient (Euclidean) on the embedding. When n exceeds
/// max_sample, a seeded stratified subsample is scored instead.
double silhouette(const Matrix& embedding, const ClusterLabeling& labels,
                  Index max_sample = 10000, std::uint64_t seed = 0);

/// Davies-Bouldin index; +infinity when two cluster centroids coincide so a
/// sweep never aborts on a degenerate labeling.
double dbi(const Matrix& embedding, const ClusterLabeling& labels);

/// Per-cluster gene ranking by mean log-expression difference (cluster mean
/// minus rest mean), descending, ties by gene index. Returns the top_m gene
/// indices per cluster.
std::vector<std::vector<Index>> rank_genes(const Dataset& ds,
                                           const ClusterLabeling& labels,
                                           Index top_m = 20);

/// Cluster marker coherence: per cluster, the best over cell types of
/// |top_m genes ∩ type markers| / min(top_m, |type markers|), averaged over
/// clusters.
double cmc(const Dataset& ds, const ClusterLabeling& labels,
           const MarkerSets& markers, Index top_m = 20);

/// Marker exclusion rate: the fraction of all marker genes (union over
/// types, present in the dataset) appearing in no cluster's top_m list.
double mer(const Dataset& ds, const ClusterLabeling& labels,
           const MarkerSets& markers, Index top_m = 20);

/// Mean fold enrichment of the best-matching marker set in each cluster's
/// top_m genes, relative to the expected fraction |markers| / n_genes.
double enrichment(const Dataset& ds, const ClusterLabeling& labels,
                  const MarkerSets& markers, Index top_m = 20);

/// Adjusted Rand index between two labelings of the same cells.
double ari(const std::vector<int>& labels_a, const std::vector<int>& labels_b);

/// Table row serialization (header
/// `method,k,resolution,clusters,chaos,morans_i,silhouette,dbi,cmc,mer,enrichment`).
std::string metric_report_header();
std::string to_csv_row(const MetricReport& r);
MetricReport from_csv_row(const std::string& line);
std::string to_json_line(const MetricReport& r);

}  // namespace spatialnmf
