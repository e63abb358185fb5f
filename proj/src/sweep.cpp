#include "spatialnmf/sweep.hpp"

#include "spatialnmf/io.hpp"
#include "spatialnmf/log.hpp"
#include "spatialnmf/rng.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace spatialnmf {

namespace {

std::uint64_t point_seed(std::uint64_t base, Index k, double rho) {
    return derive_seed(base, static_cast<std::uint64_t>(k),
                       std::bit_cast<std::uint64_t>(rho));
}

std::string point_file(const std::string& dir, Method method, Index k,
                       double rho) {
    return dir + "/point_" + method_name(method) + "_k" + std::to_string(k) +
           "_rho" + format_double(rho) + ".csv";
}

MetricReport error_row(Method method, Index k, double rho) {
    MetricReport r;
    r.method = method_name(method);
    r.k = k;
    r.resolution = rho;
    r.n_clusters = 0;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.chaos = r.morans_i = r.silhouette = r.dbi = nan;
    r.cmc = r.mer = r.enrichment = nan;
    return r;
}

bool try_load_point(const std::string& path, MetricReport& out) {
    std::ifstream in(path);
    if (!in) return false;
    std::string header, row;
    if (!std::getline(in, header) || header != metric_report_header()) {
        return false;
    }
    if (!std::getline(in, row)) return false;
    try {
        out = from_csv_row(row);
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

void save_point(const std::string& path, const MetricReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << metric_report_header() << '\n' << to_csv_row(r) << '\n';
}

bool objectives_finite(const MetricReport& r) {
    return std::isfinite(r.chaos) && std::isfinite(r.morans_i) &&
           std::isfinite(r.silhouette) && std::isfinite(r.dbi);
}

bool dominates(const MetricReport& a, const MetricReport& b) {
    const bool no_worse = a.chaos <= b.chaos && a.dbi <= b.dbi &&
                          a.morans_i >= b.morans_i &&
                          a.silhouette >= b.silhouette;
    const bool strictly_better = a.chaos < b.chaos || a.dbi < b.dbi ||
                                 a.morans_i > b.morans_i ||
                                 a.silhouette > b.silhouette;
    return no_worse && strictly_better;
}

}  // namespace

std::vector<MetricReport> run_sweep(const Dataset& ds, const SweepConfig& cfg,
                                    const PipelineConfig& pipeline,
                                    const SweepOptions& options) {
    if (cfg.k_grid.empty() || cfg.rho_grid.empty()) {
        throw std::invalid_argument("run_sweep: grids must be nonempty");
    }
    PipelineConfig base = pipeline;
    base.alpha = cfg.alpha;
    base.beta = cfg.beta;
    base.steps = cfg.steps;
    base.seed = cfg.seed;

    const bool resume = !options.resume_dir.empty();
    if (resume) std::filesystem::create_directories(options.resume_dir);

    const std::size_t n_k = cfg.k_grid.size();
    const std::size_t n_rho = cfg.rho_grid.size();
    std::vector<MetricReport> reports(n_k * n_rho);
    std::vector<char> done(n_k * n_rho, 0);

    std::size_t completed = 0;
    const std::size_t total = n_k * n_rho;
    std::mutex progress_mutex;
    auto progress = [&](const MetricReport& r) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        ++completed;
        std::ostringstream line;
        line << "sweep " << r.method << " k=" << r.k
             << " rho=" << format_double(r.resolution)
             << " clusters=" << r.n_clusters << " (" << completed << "/"
             << total << ")";
        std::fprintf(stderr, "%s\n", line.str().c_str());
    };

    if (resume) {
        for (std::size_t ki = 0; ki < n_k; ++ki) {
            for (std::size_t ri = 0; ri < n_rho; ++ri) {
                MetricReport r;
                if (try_load_point(point_file(options.resume_dir, cfg.method,
                                              cfg.k_grid[ki], cfg.rho_grid[ri]),
                                   r)) {
                    reports[ki * n_rho + ri] = r;
                    done[ki * n_rho + ri] = 1;
                    progress(r);
                }
            }
        }
    }

    const SpatialGraph hybrid = build_hybrid_graph(ds, base);

    for (std::size_t ki = 0; ki < n_k; ++ki) {
        const Index k = cfg.k_grid[ki];
        bool k_needed = false;
        for (std::size_t ri = 0; ri < n_rho; ++ri) {
            k_needed = k_needed || !done[ki * n_rho + ri];
        }
        if (!k_needed) continue;

        EmbeddingStage stage;
        bool stage_ok = true;
        try {
            stage = embed_method(ds, cfg.method, k, base, hybrid);
        } catch (const std::exception& e) {
            log::warn("sweep: embedding for k=" + std::to_string(k) +
                      " failed: " + e.what());
            stage_ok = false;
        }

        auto run_point = [&](std::size_t ri) {
            const double rho = cfg.rho_grid[ri];
            MetricReport& slot = reports[ki * n_rho + ri];
            if (!stage_ok) {
                slot = error_row(cfg.method, k, rho);
            } else {
                try {
                    PipelineConfig point_cfg = base;
                    point_cfg.seed = point_seed(cfg.seed, k, rho);
                    PipelineResult result;
                    result.model = stage.model;
                    result.embedding = stage.embedding;
                    result.smoothed = stage.smoothed;
                    result.hybrid = hybrid;
                    result.mixed = stage.mixed;
                    result.labels =
                        leiden(stage.cluster_graph, rho, point_cfg.seed);
                    slot = evaluate(ds, result, cfg.method, k, rho, point_cfg,
                                    options.markers);
                } catch (const std::exception& e) {
                    log::warn("sweep: point k=" + std::to_string(k) +
                              " rho=" + format_double(rho) +
                              " failed: " + e.what());
                    slot = error_row(cfg.method, k, rho);
                }
            }
            if (resume) {
                save_point(point_file(options.resume_dir, cfg.method, k, rho),
                           slot);
            }
            progress(slot);
        };

        std::vector<std::size_t> pending;
        for (std::size_t ri = 0; ri < n_rho; ++ri) {
            if (!done[ki * n_rho + ri]) pending.push_back(ri);
        }
        const int workers =
            std::max(1, std::min<int>(options.threads,
                                      static_cast<int>(pending.size())));
        if (workers <= 1) {
            for (std::size_t ri : pending) run_point(ri);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(workers));
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    while (true) {
                        const std::size_t idx = next.fetch_add(1);
                        if (idx >= pending.size()) break;
                        run_point(pending[idx]);
                    }
                });
            }
            for (auto& t : pool) t.join();
        }
    }
    return reports;
}

std::vector<MetricReport> pareto_front(
    const std::vector<MetricReport>& reports) {
    if (reports.empty()) {
        throw std::invalid_argument("pareto_front: no reports");
    }
    std::vector<MetricReport> front;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (!objectives_finite(reports[i])) continue;
        bool dominated = false;
        for (std::size_t j = 0; j < reports.size() && !dominated; ++j) {
            if (i == j || !objectives_finite(reports[j])) continue;
            dominated = dominates(reports[j], reports[i]);
        }
        if (!dominated) front.push_back(reports[i]);
    }
    return front;
}

void export_table(const std::vector<MetricReport>& reports,
                  const std::string& path) {
    std::vector<MetricReport> sorted = reports;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const MetricReport& a, const MetricReport& b) {
                         if (a.method != b.method) return a.method < b.method;
                         if (a.k != b.k) return a.k < b.k;
                         return a.resolution < b.resolution;
                     });
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << metric_report_header() << '\n';
    for (const auto& r : sorted) out << to_csv_row(r) << '\n';
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<MetricReport> read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    std::string line;
    if (!std::getline(in, line) || line != metric_report_header()) {
        throw std::runtime_error(path + ": missing or wrong header");
    }
    std::vector<MetricReport> out;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(from_csv_row(line));
    }
    return out;
}

}  // namespace spatialnmf
