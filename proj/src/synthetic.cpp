#include "spatialnmf/synthetic.hpp"

#include "spatialnmf/io.hpp"
#include "spatialnmf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace spatialnmf {

namespace {

constexpr double kTargetSpacing = 15.0;  // micrometers, median NN distance

void check_spec(const SyntheticSpec& spec) {
    if (spec.n_domains < 2) {
        throw std::invalid_argument("synthetic: n_domains must be >= 2");
    }
    if (spec.n_genes < spec.n_domains) {
        throw std::invalid_argument("synthetic: need n_genes >= n_domains");
    }
    if (spec.n_cells < spec.n_domains) {
        throw std::invalid_argument("synthetic: need n_cells >= n_domains");
    }
    if (spec.program_strength <= 0.0) {
        throw std::invalid_argument("synthetic: program_strength must be > 0");
    }
    if (spec.noise_rate < 0.0) {
        throw std::invalid_argument("synthetic: noise_rate must be >= 0");
    }
}

/// Labels by rank quantile of a per-cell key: equal-sized, nonempty bins.
std::vector<int> quantile_labels(const std::vector<double>& key,
                                 Index n_domains) {
    const std::size_t n = key.size();
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        if (key[static_cast<std::size_t>(a)] != key[static_cast<std::size_t>(b)]) {
            return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)];
        }
        return a < b;
    });
    std::vector<int> labels(n, 0);
    for (std::size_t rank = 0; rank < n; ++rank) {
        labels[static_cast<std::size_t>(order[rank])] = static_cast<int>(
            std::min<std::size_t>(static_cast<std::size_t>(n_domains) - 1,
                                  rank * static_cast<std::size_t>(n_domains) / n));
    }
    return labels;
}

std::vector<int> assign_domains(const Matrix& coords,
                                const SyntheticSpec& spec, double side,
                                Rng& rng) {
    const Index n = coords.rows();
    switch (spec.layout) {
        case DomainLayout::stripes: {
            std::vector<double> key(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i) {
                key[static_cast<std::size_t>(i)] = coords(i, 0);
            }
            return quantile_labels(key, spec.n_domains);
        }
        case DomainLayout::rings: {
            const double cx = side / 2.0, cy = side / 2.0;
            std::vector<double> key(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i) {
                const double dx = coords(i, 0) - cx, dy = coords(i, 1) - cy;
                key[static_cast<std::size_t>(i)] = dx * dx + dy * dy;
            }
            return quantile_labels(key, spec.n_domains);
        }
        case DomainLayout::voronoi: {
            Matrix seeds(spec.n_domains, 2);
            for (Index d = 0; d < spec.n_domains; ++d) {
                seeds(d, 0) = rng.uniform(0.0, side);
                seeds(d, 1) = rng.uniform(0.0, side);
            }
            std::vector<int> labels(static_cast<std::size_t>(n), 0);
            for (Index i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (Index d = 0; d < spec.n_domains; ++d) {
                    const double dx = coords(i, 0) - seeds(d, 0);
                    const double dy = coords(i, 1) - seeds(d, 1);
                    const double dist = dx * dx + dy * dy;
                    if (dist < best) {
                        best = dist;
                        labels[static_cast<std::size_t>(i)] = static_cast<int>(d);
                    }
                }
            }
            // A domain whose seed attracted no cell grabs its closest
            // still-unclaimed cell so every domain is nonempty.
            std::vector<Index> count(static_cast<std::size_t>(spec.n_domains), 0);
            for (int l : labels) ++count[static_cast<std::size_t>(l)];
            for (Index d = 0; d < spec.n_domains; ++d) {
                if (count[static_cast<std::size_t>(d)] > 0) continue;
                Index best_cell = -1;
                double best = std::numeric_limits<double>::infinity();
                for (Index i = 0; i < n; ++i) {
                    const int l = labels[static_cast<std::size_t>(i)];
                    if (count[static_cast<std::size_t>(l)] <= 1) continue;
                    const double dx = coords(i, 0) - seeds(d, 0);
                    const double dy = coords(i, 1) - seeds(d, 1);
                    const double dist = dx * dx + dy * dy;
                    if (dist < best) {
                        best = dist;
                        best_cell = i;
                    }
                }
                --count[static_cast<std::size_t>(
                    labels[static_cast<std::size_t>(best_cell)])];
                labels[static_cast<std::size_t>(best_cell)] = static_cast<int>(d);
                ++count[static_cast<std::size_t>(d)];
            }
            return labels;
        }
    }
    throw std::logic_error("synthetic: unknown layout");
}

}  // namespace

DomainLayout parse_layout(const std::string& name) {
    if (name == "voronoi") return DomainLayout::voronoi;
    if (name == "stripes") return DomainLayout::stripes;
    if (name == "rings") return DomainLayout::rings;
    throw std::invalid_argument("unknown layout '" + name +
                                "' (voronoi|stripes|rings)");
}

SyntheticData generate(const SyntheticSpec& spec) {
    check_spec(spec);
    Rng rng(spec.seed);

    // For a uniform point process the median nearest-neighbor distance is
    // sqrt(ln 2 / (pi * density)); solve for the side length that puts it
    // at the target spacing.
    const double side = kTargetSpacing *
                        std::sqrt(M_PI * static_cast<double>(spec.n_cells) /
                                  std::log(2.0));

    const Index n = spec.n_cells, p = spec.n_genes;
    Matrix coords(n, 2);
    for (Index i = 0; i < n; ++i) {
        coords(i, 0) = rng.uniform(0.0, side);
        coords(i, 1) = rng.uniform(0.0, side);
    }

    std::vector<int> truth = assign_domains(coords, spec, side, rng);

    const Index block = p / spec.n_domains;
    std::vector<Eigen::Triplet<double>> triplets;
    for (Index i = 0; i < n; ++i) {
        const Index d = truth[static_cast<std::size_t>(i)];
        const Index block_start = d * block;
        for (Index g = 0; g < p; ++g) {
            const bool signature = g >= block_start && g < block_start + block;
            const double rate =
                spec.noise_rate + (signature ? spec.program_strength : 0.0);
            if (rate <= 0.0) continue;
            const double count = static_cast<double>(rng.poisson(rate));
            if (count > 0.0) triplets.emplace_back(i, g, count);
        }
    }

    SyntheticData data;
    data.dataset.counts = SparseMatrix(n, p);
    data.dataset.counts.setFromTriplets(triplets.begin(), triplets.end());
    data.dataset.counts.makeCompressed();
    data.dataset.coords = std::move(coords);
    data.dataset.is_lognorm = false;
    data.dataset.cell_ids.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        data.dataset.cell_ids.push_back("cell_" + std::to_string(i));
    }
    data.dataset.gene_names.reserve(static_cast<std::size_t>(p));
    for (Index g = 0; g < p; ++g) {
        data.dataset.gene_names.push_back("gene_" + std::to_string(g));
    }
    data.truth = std::move(truth);
    for (Index d = 0; d < spec.n_domains; ++d) {
        std::vector<std::string> genes;
        for (Index g = d * block; g < (d + 1) * block; ++g) {
            genes.push_back(data.dataset.gene_names[static_cast<std::size_t>(g)]);
        }
        data.markers.sets.emplace("domain_" + std::to_string(d),
                                  std::move(genes));
    }
    return data;
}

void save_synthetic(const SyntheticData& data, const std::string& out_dir) {
    save_dataset(data.dataset, out_dir + "/matrix.mtx", out_dir + "/genes.txt",
                 out_dir + "/cells.txt", out_dir + "/coords.csv");
    std::ofstream truth(out_dir + "/truth.csv");
    if (!truth) {
        throw std::runtime_error(out_dir + "/truth.csv: cannot open for writing");
    }
    truth << "cell_id,domain\n";
    for (std::size_t i = 0; i < data.truth.size(); ++i) {
        truth << data.dataset.cell_ids[i] << ',' << data.truth[i] << '\n';
    }
    write_markers(out_dir + "/markers.tsv", data.markers);
}

}  // namespace spatialnmf
