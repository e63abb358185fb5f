#include "spatialnmf/pipeline.hpp"

#include "spatialnmf/log.hpp"
#include "spatialnmf/rng.hpp"

#include <cmath>
#include <limits>

namespace spatialnmf {

namespace {

constexpr std::uint64_t kLeidenTag = 0x6c656964656eULL;
constexpr std::uint64_t kSilhouetteTag = 0x73696cULL;

void require_lognorm(const Dataset& ds) {
    if (!ds.is_lognorm) {
        throw std::invalid_argument(
            "pipeline: dataset must be log-normalized (run preprocessing first)");
    }
}

}  // namespace

Method parse_method(const std::string& name) {
    if (name == "nmf") return Method::nmf_plain;
    if (name == "snmf") return Method::snmf;
    if (name == "hsnmf") return Method::hsnmf;
    throw std::invalid_argument("unknown method '" + name +
                                "' (nmf|snmf|hsnmf)");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::nmf_plain: return "nmf";
        case Method::snmf: return "snmf";
        case Method::hsnmf: return "hsnmf";
    }
    throw std::logic_error("unknown method");
}

SpatialGraph build_hybrid_graph(const Dataset& ds,
                                const PipelineConfig& config) {
    const SpatialGraph contact = contact_graph(ds.coords, config.r_contact);
    const SpatialGraph radius =
        radius_graph(ds.coords, config.r_radius, EdgeWeight::gaussian);
    return hybrid_merge(contact, radius);
}

EmbeddingStage embed_method(const Dataset& ds, Method method, Index k,
                            const PipelineConfig& config,
                            const SpatialGraph& hybrid) {
    require_lognorm(ds);
    EmbeddingStage stage;
    stage.model = nmf_fit(ds.counts, k, config.nmf_max_iter, config.nmf_tol,
                          config.seed);
    switch (method) {
        case Method::nmf_plain:
            stage.embedding = stage.model.W;
            break;
        case Method::snmf: {
            const SpatialGraph neighbors =
                spatial_knn_graph(ds.coords, config.knn_spatial);
            stage.smoothed = snmf_smooth(stage.model.W, neighbors);
            stage.embedding = stage.smoothed.W_s;
            break;
        }
        case Method::hsnmf: {
            const DiffusionOperator op = diffusion_operator(hybrid);
            stage.smoothed =
                diffuse(stage.model.W, op, config.beta, config.steps);
            stage.embedding = stage.smoothed.W_s;
            break;
        }
    }
    const SpatialGraph feature =
        feature_knn_graph(stage.embedding, config.knn_feature);
    if (method == Method::hsnmf) {
        stage.mixed = mix_adjacency(row_normalize(hybrid),
                                    row_normalize(feature), config.alpha);
        stage.cluster_graph = *stage.mixed;
    } else {
        stage.cluster_graph = feature;
    }
    return stage;
}

PipelineResult cluster_pipeline(const Dataset& ds, Index k, double resolution,
                                double alpha, const PipelineConfig& config) {
    PipelineConfig cfg = config;
    cfg.alpha = alpha;
    return run_method(ds, Method::hsnmf, k, resolution, cfg);
}

PipelineResult run_method(const Dataset& ds, Method method, Index k,
                          double resolution, const PipelineConfig& config) {
    PipelineResult result;
    result.hybrid = build_hybrid_graph(ds, config);
    EmbeddingStage stage = embed_method(ds, method, k, config, result.hybrid);
    result.model = std::move(stage.model);
    result.embedding = std::move(stage.embedding);
    result.smoothed = std::move(stage.smoothed);
    result.mixed = std::move(stage.mixed);
    result.labels = leiden(stage.cluster_graph, resolution,
                           derive_seed(config.seed, kLeidenTag));
    return result;
}

MetricReport evaluate(const Dataset& ds, const PipelineResult& result,
                      Method method, Index k, double resolution,
                      const PipelineConfig& config,
                      const MarkerSets* markers) {
    MetricReport report;
    report.method = method_name(method);
    report.k = k;
    report.resolution = resolution;
    report.n_clusters = result.labels.n_clusters;

    const Matrix& embedding =
        config.metrics_on_raw_w ? result.model.W : result.embedding;

    report.chaos = chaos(ds.coords, result.labels);
    const SpatialGraph* weights = &result.hybrid;
    SpatialGraph knn;
    if (config.morans_on_knn) {
        knn = spatial_knn_graph(ds.coords, config.knn_spatial);
        weights = &knn;
    }
    report.morans_i = morans_i(embedding.col(0), *weights);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (result.labels.n_clusters >= 2) {
        report.silhouette = silhouette(embedding, result.labels, 10000,
                                       derive_seed(config.seed, kSilhouetteTag));
        report.dbi = dbi(embedding, result.labels);
    } else {
        log::warn("evaluate: single cluster; silhouette and DBI undefined");
        report.silhouette = nan;
        report.dbi = nan;
    }
    if (markers != nullptr && !markers->empty()) {
        const MarkerSets valid = validate_markers(*markers, ds.gene_names);
        report.cmc = cmc(ds, result.labels, valid, config.top_m);
        report.mer = mer(ds, result.labels, valid, config.top_m);
        report.enrichment = enrichment(ds, result.labels, valid, config.top_m);
    } else {
        report.cmc = nan;
        report.mer = nan;
        report.enrichment = nan;
    }
    return report;
}

}  // namespace spatialnmf
