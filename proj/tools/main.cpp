#include "spatialnmf/io.hpp"
#include "spatialnmf/log.hpp"
#include "spatialnmf/metrics.hpp"
#include "spatialnmf/pipeline.hpp"
#include "spatialnmf/preprocess.hpp"
#include "spatialnmf/sweep.hpp"
#include "spatialnmf/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <unordered_map>
#include <unordered_set>

namespace {

using namespace spatialnmf;

struct DatasetArgs {
    std::string matrix, genes, cells, coords;

    void attach(CLI::App* cmd) {
        cmd->add_option("--matrix", matrix, "Matrix Market expression matrix")
            ->required();
        cmd->add_option("--genes", genes, "gene list, one per line")->required();
        cmd->add_option("--cells", cells, "cell list, one per line")->required();
        cmd->add_option("--coords", coords, "CSV cell_id,x,y in micrometers")
            ->required();
    }

    Dataset load() const { return load_dataset(matrix, genes, cells, coords); }
};

struct QcArgs {
    Index min_cells = 3;
    Index min_genes = 200;
    double target_sum = 10000.0;
    std::string doublet_scores;
    double doublet_threshold = 0.2;
    std::string exclude_genes_path;

    void attach(CLI::App* cmd) {
        cmd->add_option("--min-cells", min_cells,
                        "drop genes detected in fewer cells");
        cmd->add_option("--min-genes", min_genes,
                        "drop cells with fewer detected genes");
        cmd->add_option("--target-sum", target_sum,
                        "per-cell total after normalization");
        cmd->add_option("--doublet-scores", doublet_scores,
                        "CSV cell_id,score from an external scorer");
        cmd->add_option("--doublet-threshold", doublet_threshold,
                        "drop cells scoring above this");
        cmd->add_option("--exclude-genes", exclude_genes_path,
                        "file of gene names to drop before analysis");
    }
};

struct QcOutcome {
    Dataset dataset;
    std::vector<std::string> dropped_genes;
    std::vector<std::string> dropped_cells;
    std::vector<std::string> dropped_doublets;
};

std::vector<std::string> missing_from(const std::vector<std::string>& before,
                                      const std::vector<std::string>& after) {
    std::unordered_set<std::string> kept(after.begin(), after.end());
    std::vector<std::string> out;
    for (const auto& id : before) {
        if (kept.count(id) == 0) out.push_back(id);
    }
    return out;
}

QcOutcome apply_qc(Dataset ds, const QcArgs& qc) {
    QcOutcome out;
    if (!qc.doublet_scores.empty()) {
        const auto scores = read_scores_csv(qc.doublet_scores);
        Dataset next = drop_high_score_cells(ds, scores, qc.doublet_threshold);
        out.dropped_doublets = missing_from(ds.cell_ids, next.cell_ids);
        ds = std::move(next);
    }
    if (!qc.exclude_genes_path.empty()) {
        ds = exclude_genes(ds, read_id_file(qc.exclude_genes_path));
    }
    {
        Dataset next = filter_genes(ds, qc.min_cells);
        out.dropped_genes = missing_from(ds.gene_names, next.gene_names);
        ds = std::move(next);
    }
    {
        Dataset next = filter_cells(ds, qc.min_genes);
        out.dropped_cells = missing_from(ds.cell_ids, next.cell_ids);
        ds = std::move(next);
    }
    out.dataset = normalize_and_log(ds, qc.target_sum);
    return out;
}

struct PipelineArgs {
    PipelineConfig config;
    std::string morans_graph = "hybrid";
    bool morans_raw = false;
    bool metrics_raw_w = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--r-contact", config.r_contact,
                        "contact graph radius, micrometers");
        cmd->add_option("--r-radius", config.r_radius,
                        "radius graph radius, micrometers");
        cmd->add_option("--knn", config.knn_spatial,
                        "spatial kNN neighborhood size");
        cmd->add_option("--knn-feature", config.knn_feature,
                        "latent-space kNN neighborhood size");
        cmd->add_option("--alpha", config.alpha,
                        "spatial/feature mixing weight in [0,1]");
        cmd->add_option("--beta", config.beta, "diffusion strength in [0,1]");
        cmd->add_option("--steps", config.steps, "diffusion steps");
        cmd->add_option("--nmf-max-iter", config.nmf_max_iter,
                        "multiplicative update iterations");
        cmd->add_option("--nmf-tol", config.nmf_tol,
                        "relative early-stop tolerance; <=0 disables");
        cmd->add_option("--seed", config.seed, "seed for all randomness");
        cmd->add_option("--top-m", config.top_m,
                        "genes per cluster for marker metrics");
        cmd->add_option("--morans-graph", morans_graph,
                        "weights for Moran's I: hybrid or knn")
            ->check(CLI::IsMember({"hybrid", "knn"}));
        cmd->add_flag("--morans-raw", morans_raw,
                      "Moran's I on the raw first factor instead of smoothed");
        cmd->add_flag("--metrics-raw-w", metrics_raw_w,
                      "silhouette/DBI on raw W instead of the smoothed W_s");
    }

    PipelineConfig resolve() const {
        PipelineConfig c = config;
        c.morans_on_knn = morans_graph == "knn";
        c.metrics_on_raw_w = metrics_raw_w || morans_raw;
        return c;
    }
};

void ensure_dir(const std::string& dir) {
    std::filesystem::create_directories(dir);
}

ClusterLabeling labels_from_file(const std::string& path,
                                 const std::vector<std::string>& cell_ids) {
    const auto rows = read_labels_csv(path);
    std::unordered_map<std::string, int> by_id;
    for (const auto& [id, cluster] : rows) by_id[id] = cluster;
    ClusterLabeling labeling;
    labeling.labels.reserve(cell_ids.size());
    for (const auto& id : cell_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw std::runtime_error(path + ": no cluster for cell '" + id +
                                     "'");
        }
        labeling.labels.push_back(it->second);
    }
    // Renumber to contiguous 0-based ids by first appearance.
    std::unordered_map<int, int> remap;
    for (auto& l : labeling.labels) {
        auto [it, inserted] = remap.emplace(l, static_cast<int>(remap.size()));
        l = it->second;
    }
    labeling.n_clusters = static_cast<int>(remap.size());
    return labeling;
}

std::vector<int> truth_from_file(const std::string& path,
                                 const std::vector<std::string>& cell_ids) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    std::string line;
    std::getline(in, line);  // header cell_id,domain
    std::unordered_map<std::string, int> by_id;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        by_id[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
    }
    std::vector<int> truth;
    truth.reserve(cell_ids.size());
    for (const auto& id : cell_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw std::runtime_error(path + ": no domain for cell '" + id + "'");
        }
        truth.push_back(it->second);
    }
    return truth;
}

void write_report_files(const std::string& out_dir, const MetricReport& report) {
    std::ofstream csv(out_dir + "/metrics.csv");
    csv << metric_report_header() << '\n' << to_csv_row(report) << '\n';
    std::ofstream jsonl(out_dir + "/metrics.jsonl");
    jsonl << to_json_line(report) << '\n';
    if (!csv || !jsonl) {
        throw std::runtime_error(out_dir + ": failed writing metric reports");
    }
}

int cmd_synth(const SyntheticSpec& spec, const std::string& layout,
              const std::string& out_dir) {
    SyntheticSpec resolved = spec;
    resolved.layout = parse_layout(layout);
    ensure_dir(out_dir);
    const SyntheticData data = generate(resolved);
    save_synthetic(data, out_dir);
    std::cout << "wrote " << data.dataset.n_cells() << " cells x "
              << data.dataset.n_genes() << " genes to " << out_dir << "\n";
    return 0;
}

int cmd_preprocess(const DatasetArgs& input, const QcArgs& qc,
                   const std::string& out_dir) {
    ensure_dir(out_dir);
    const QcOutcome outcome = apply_qc(input.load(), qc);
    save_dataset(outcome.dataset, out_dir + "/matrix.mtx",
                 out_dir + "/genes.txt", out_dir + "/cells.txt",
                 out_dir + "/coords.csv");
    std::ofstream report(out_dir + "/report.txt");
    report << "genes_dropped\t" << outcome.dropped_genes.size() << '\n';
    for (const auto& g : outcome.dropped_genes) report << "gene\t" << g << '\n';
    report << "cells_dropped\t" << outcome.dropped_cells.size() << '\n';
    for (const auto& c : outcome.dropped_cells) report << "cell\t" << c << '\n';
    report << "doublets_dropped\t" << outcome.dropped_doublets.size() << '\n';
    for (const auto& c : outcome.dropped_doublets) {
        report << "doublet\t" << c << '\n';
    }
    if (!report) throw std::runtime_error(out_dir + "/report.txt: write failed");
    std::cout << "kept " << outcome.dataset.n_cells() << " cells x "
              << outcome.dataset.n_genes() << " genes\n";
    return 0;
}

int cmd_run(const DatasetArgs& input, const QcArgs& qc,
            const PipelineArgs& pipe, const std::string& method_str, Index k,
            double resolution, bool preprocessed,
            const std::string& markers_path, const std::string& truth_path,
            bool dump_factors, bool dump_graph, const std::string& out_dir) {
    ensure_dir(out_dir);
    const Method method = parse_method(method_str);
    Dataset ds = input.load();
    if (preprocessed) {
        ds.is_lognorm = true;
    } else {
        ds = apply_qc(std::move(ds), qc).dataset;
    }
    const PipelineConfig config = pipe.resolve();

    std::optional<MarkerSets> markers;
    if (!markers_path.empty()) {
        markers = validate_markers(load_markers(markers_path), ds.gene_names);
    }

    const PipelineResult result = run_method(ds, method, k, resolution, config);
    write_labels_csv(out_dir + "/labels.csv", ds.cell_ids,
                     result.labels.labels);
    const MetricReport report =
        evaluate(ds, result, method, k, resolution, config,
                 markers ? &*markers : nullptr);
    write_report_files(out_dir, report);

    if (dump_factors) {
        write_factor_csv(out_dir + "/W.csv", result.model.W);
        write_factor_csv(out_dir + "/H.csv", Matrix(result.model.H.transpose()));
        write_factor_csv(out_dir + "/W_s.csv", result.embedding);
    }
    if (dump_graph) {
        write_edge_list_csv(out_dir + "/hybrid_graph.csv", result.hybrid);
        if (result.mixed) {
            write_edge_list_csv(out_dir + "/mixed_graph.csv", *result.mixed);
        }
    }
    if (!truth_path.empty()) {
        const std::vector<int> truth = truth_from_file(truth_path, ds.cell_ids);
        std::cout << "ari\t" << format_double(ari(result.labels.labels, truth))
                  << "\n";
    }
    std::cout << to_csv_row(report) << "\n";
    return 0;
}

int cmd_sweep(const DatasetArgs& input, const QcArgs& qc,
              const PipelineArgs& pipe, const std::string& method_str,
              std::vector<Index> k_grid, std::vector<double> rho_grid,
              bool preprocessed, const std::string& markers_path, int threads,
              bool resume, const std::string& out_dir) {
    ensure_dir(out_dir);
    Dataset ds = input.load();
    if (preprocessed) {
        ds.is_lognorm = true;
    } else {
        ds = apply_qc(std::move(ds), qc).dataset;
    }
    SweepConfig cfg;
    cfg.method = parse_method(method_str);
    if (!k_grid.empty()) cfg.k_grid = std::move(k_grid);
    if (!rho_grid.empty()) cfg.rho_grid = std::move(rho_grid);
    const PipelineConfig config = pipe.resolve();
    cfg.alpha = config.alpha;
    cfg.beta = config.beta;
    cfg.steps = config.steps;
    cfg.seed = config.seed;

    std::optional<MarkerSets> markers;
    if (!markers_path.empty()) {
        markers = validate_markers(load_markers(markers_path), ds.gene_names);
    }

    SweepOptions options;
    options.threads = threads;
    options.markers = markers ? &*markers : nullptr;
    if (resume) options.resume_dir = out_dir + "/points";

    const auto reports = run_sweep(ds, cfg, config, options);
    export_table(reports, out_dir + "/reports.csv");
    export_table(pareto_front(reports), out_dir + "/pareto.csv");
    std::cout << "swept " << reports.size() << " grid points\n";
    return 0;
}

int cmd_metrics(const DatasetArgs& input, const PipelineArgs& pipe,
                const std::string& labels_path, const std::string& factors_path,
                const std::string& markers_path, const std::string& method_name,
                Index k, double resolution, const std::string& out_dir) {
    ensure_dir(out_dir);
    Dataset ds = input.load();
    ds.is_lognorm = true;  // metrics run on preprocessed artifacts
    const PipelineConfig config = pipe.resolve();

    const ClusterLabeling labeling = labels_from_file(labels_path, ds.cell_ids);
    const Matrix embedding = read_factor_csv(factors_path);
    if (embedding.rows() != ds.n_cells()) {
        throw std::runtime_error(factors_path + ": " +
                                 std::to_string(embedding.rows()) +
                                 " rows for " + std::to_string(ds.n_cells()) +
                                 " cells");
    }

    MetricReport report;
    report.method = method_name;
    report.k = k;
    report.resolution = resolution;
    report.n_clusters = labeling.n_clusters;
    report.chaos = chaos(ds.coords, labeling);
    SpatialGraph weights = config.morans_on_knn
                               ? spatial_knn_graph(ds.coords, config.knn_spatial)
                               : build_hybrid_graph(ds, config);
    report.morans_i = morans_i(embedding.col(0), weights);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (labeling.n_clusters >= 2) {
        report.silhouette = silhouette(embedding, labeling, 10000, config.seed);
        report.dbi = dbi(embedding, labeling);
    } else {
        report.silhouette = nan;
        report.dbi = nan;
    }
    if (!markers_path.empty()) {
        const MarkerSets markers =
            validate_markers(load_markers(markers_path), ds.gene_names);
        report.cmc = cmc(ds, labeling, markers, config.top_m);
        report.mer = mer(ds, labeling, markers, config.top_m);
        report.enrichment = enrichment(ds, labeling, markers, config.top_m);
    } else {
        report.cmc = nan;
        report.mer = nan;
        report.enrichment = nan;
    }
    write_report_files(out_dir, report);
    std::cout << to_csv_row(report) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Spatially regularized NMF (SNMF / hSNMF) for spatial "
        "transcriptomics: preprocessing, clustering, metrics and "
        "hyperparameter sweeps"};
    app.require_subcommand(1);
    app.set_config("--config");

    // synth
    auto* synth = app.add_subcommand(
        "synth", "generate a synthetic dataset with known domains");
    SyntheticSpec synth_spec;
    std::string synth_layout = "voronoi";
    std::string synth_out = "synth_out";
    synth->add_option("--cells", synth_spec.n_cells, "number of cells");
    synth->add_option("--genes", synth_spec.n_genes, "number of genes");
    synth->add_option("--domains", synth_spec.n_domains, "number of domains");
    synth->add_option("--layout", synth_layout, "voronoi, stripes or rings")
        ->check(CLI::IsMember({"voronoi", "stripes", "rings"}));
    synth->add_option("--strength", synth_spec.program_strength,
                      "signature-gene Poisson rate");
    synth->add_option("--noise", synth_spec.noise_rate,
                      "background Poisson rate");
    synth->add_option("--seed", synth_spec.seed, "generator seed");
    synth->add_option("--out-dir", synth_out, "output directory");

    // preprocess
    auto* pre = app.add_subcommand("preprocess",
                                   "QC, normalization and log transform");
    DatasetArgs pre_input;
    QcArgs pre_qc;
    std::string pre_out = "preprocessed";
    pre_input.attach(pre);
    pre_qc.attach(pre);
    pre->add_option("--out-dir", pre_out, "output directory");

    // run
    auto* run = app.add_subcommand(
        "run", "run one pipeline (nmf, snmf or hsnmf) and score it");
    DatasetArgs run_input;
    QcArgs run_qc;
    PipelineArgs run_pipe;
    std::string run_method = "hsnmf";
    Index run_k = 10;
    double run_resolution = 0.4;
    bool run_preprocessed = false;
    std::string run_markers, run_truth;
    bool run_dump_factors = false, run_dump_graph = false;
    std::string run_out = "run_out";
    int run_threads = 1;
    run_input.attach(run);
    run_qc.attach(run);
    run_pipe.attach(run);
    run->add_option("--method", run_method, "nmf, snmf or hsnmf")
        ->check(CLI::IsMember({"nmf", "snmf", "hsnmf"}));
    run->add_option("--k", run_k, "latent dimensionality")->required();
    run->add_option("--resolution", run_resolution, "Leiden resolution")
        ->required();
    run->add_flag("--preprocessed", run_preprocessed,
                  "input is already QC'd and log-normalized");
    run->add_option("--markers", run_markers, "marker TSV for CMC/MER/enrichment");
    run->add_option("--truth", run_truth,
                    "truth CSV cell_id,domain; prints ARI when given");
    run->add_flag("--dump-factors", run_dump_factors,
                  "write W.csv, H.csv and W_s.csv");
    run->add_flag("--dump-graph", run_dump_graph,
                  "write graph edge lists");
    run->add_option("--threads", run_threads,
                    "accepted for interface symmetry; run is single-threaded");
    run->add_option("--out-dir", run_out, "output directory");

    // sweep
    auto* sweep = app.add_subcommand(
        "sweep", "grid search over (k, resolution) with Pareto extraction");
    DatasetArgs sweep_input;
    QcArgs sweep_qc;
    PipelineArgs sweep_pipe;
    std::string sweep_method = "hsnmf";
    std::vector<Index> sweep_k_grid;
    std::vector<double> sweep_rho_grid;
    bool sweep_preprocessed = false;
    std::string sweep_markers;
    int sweep_threads = 1;
    bool sweep_resume = false;
    std::string sweep_out = "sweep_out";
    sweep_input.attach(sweep);
    sweep_qc.attach(sweep);
    sweep_pipe.attach(sweep);
    sweep->add_option("--method", sweep_method, "nmf, snmf or hsnmf")
        ->check(CLI::IsMember({"nmf", "snmf", "hsnmf"}));
    sweep->add_option("--k-grid", sweep_k_grid,
                      "latent dimensionalities (default paper grid)")
        ->delimiter(',');
    sweep->add_option("--rho-grid", sweep_rho_grid,
                      "Leiden resolutions (default paper grid)")
        ->delimiter(',');
    sweep->add_flag("--preprocessed", sweep_preprocessed,
                    "input is already QC'd and log-normalized");
    sweep->add_option("--markers", sweep_markers, "marker TSV");
    sweep->add_option("--threads", sweep_threads, "parallel grid workers");
    sweep->add_flag("--resume", sweep_resume,
                    "reuse per-point results under <out-dir>/points");
    sweep->add_option("--out-dir", sweep_out, "output directory");

    // metrics
    auto* metrics_cmd = app.add_subcommand(
        "metrics", "score an existing labeling against a dataset");
    DatasetArgs metrics_input;
    PipelineArgs metrics_pipe;
    std::string metrics_labels, metrics_factors, metrics_markers;
    std::string metrics_method = "external";
    Index metrics_k = 0;
    double metrics_resolution = 0.0;
    std::string metrics_out = "metrics_out";
    metrics_input.attach(metrics_cmd);
    metrics_pipe.attach(metrics_cmd);
    metrics_cmd->add_option("--labels", metrics_labels, "labels CSV")
        ->required();
    metrics_cmd->add_option("--factors", metrics_factors,
                            "embedding CSV (factor_1..factor_k)")
        ->required();
    metrics_cmd->add_option("--markers", metrics_markers, "marker TSV");
    metrics_cmd->add_option("--method", metrics_method,
                            "method name recorded in the report");
    metrics_cmd->add_option("--k", metrics_k, "k recorded in the report");
    metrics_cmd->add_option("--resolution", metrics_resolution,
                            "resolution recorded in the report");
    metrics_cmd->add_option("--out-dir", metrics_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            return cmd_synth(synth_spec, synth_layout, synth_out);
        }
        if (pre->parsed()) {
            return cmd_preprocess(pre_input, pre_qc, pre_out);
        }
        if (run->parsed()) {
            return cmd_run(run_input, run_qc, run_pipe, run_method, run_k,
                           run_resolution, run_preprocessed, run_markers,
                           run_truth, run_dump_factors, run_dump_graph,
                           run_out);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sweep_input, sweep_qc, sweep_pipe, sweep_method,
                             sweep_k_grid, sweep_rho_grid, sweep_preprocessed,
                             sweep_markers, sweep_threads, sweep_resume,
                             sweep_out);
        }
        if (metrics_cmd->parsed()) {
            return cmd_metrics(metrics_input, metrics_pipe, metrics_labels,
                               metrics_factors, metrics_markers,
                               metrics_method, metrics_k, metrics_resolution,
                               metrics_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
