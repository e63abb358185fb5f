#include "spatialnmf/metrics.hpp"

#include "spatialnmf/detail/bucket_grid.hpp"
#include "spatialnmf/io.hpp"
#include "spatialnmf/log.hpp"
#include "spatialnmf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace spatialnmf {

namespace {

std::vector<std::vector<Index>> members_by_cluster(
    const ClusterLabeling& labels) {
    std::vector<std::vector<Index>> members(
        static_cast<std::size_t>(labels.n_clusters));
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        const int l = labels.labels[i];
        if (l < 0 || l >= labels.n_clusters) {
            throw std::invalid_argument("labels contain id " +
                                        std::to_string(l) +
                                        " outside [0, n_clusters)");
        }
        members[static_cast<std::size_t>(l)].push_back(static_cast<Index>(i));
    }
    for (std::size_t c = 0; c < members.size(); ++c) {
        if (members[c].empty()) {
            throw std::invalid_argument("cluster " + std::to_string(c) +
                                        " is empty; labels must be contiguous");
        }
    }
    return members;
}

void require_rows(Index have, const ClusterLabeling& labels, const char* op) {
    if (static_cast<Index>(labels.labels.size()) != have) {
        throw std::invalid_argument(std::string(op) + ": " +
                                    std::to_string(labels.labels.size()) +
                                    " labels for " + std::to_string(have) +
                                    " rows");
    }
}

/// Marker gene-name sets resolved to column indices.
std::map<std::string, std::vector<Index>> marker_indices(
    const Dataset& ds, const MarkerSets& markers) {
    std::unordered_map<std::string, Index> gene_index;
    gene_index.reserve(ds.gene_names.size());
    for (std::size_t g = 0; g < ds.gene_names.size(); ++g) {
        gene_index.emplace(ds.gene_names[g], static_cast<Index>(g));
    }
    std::map<std::string, std::vector<Index>> out;
    for (const auto& [type, genes] : markers.sets) {
        std::vector<Index> ids;
        for (const auto& g : genes) {
            auto it = gene_index.find(g);
            if (it != gene_index.end()) ids.push_back(it->second);
        }
        if (!ids.empty()) out.emplace(type, std::move(ids));
    }
    if (out.empty()) {
        throw std::invalid_argument(
            "no marker gene is present in the dataset");
    }
    return out;
}

}  // namespace

MarkerSets load_markers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    MarkerSets markers;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 'cell_type<TAB>gene'");
        }
        markers.sets[line.substr(0, tab)].push_back(line.substr(tab + 1));
    }
    return markers;
}

void write_markers(const std::string& path, const MarkerSets& markers) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    for (const auto& [type, genes] : markers.sets) {
        for (const auto& g : genes) out << type << '\t' << g << '\n';
    }
}

MarkerSets validate_markers(const MarkerSets& markers,
                            const std::vector<std::string>& gene_names) {
    std::unordered_set<std::string> known(gene_names.begin(),
                                          gene_names.end());
    MarkerSets out;
    for (const auto& [type, genes] : markers.sets) {
        std::vector<std::string> kept;
        for (const auto& g : genes) {
            if (known.count(g) != 0) {
                kept.push_back(g);
            } else {
                log::warn("marker gene '" + g + "' (" + type +
                          ") not in dataset; dropped");
            }
        }
        if (!kept.empty()) out.sets.emplace(type, std::move(kept));
    }
    if (out.empty()) {
        throw std::invalid_argument(
            "no marker gene is present in the dataset");
    }
    return out;
}

double chaos(const Matrix& coords, const ClusterLabeling& labels) {
    require_rows(coords.rows(), labels, "chaos");
    const Index n = coords.rows();
    const auto members = members_by_cluster(labels);
    bool any_pair = false;
    for (const auto& m : members) any_pair = any_pair || m.size() >= 2;
    if (!any_pair) {
        throw std::invalid_argument(
            "chaos: every cluster is a singleton; nearest same-cluster "
            "neighbors do not exist");
    }

    Matrix standardized(n, 2);
    for (Index a = 0; a < 2; ++a) {
        const double mean = coords.col(a).mean();
        const double var = (coords.col(a).array() - mean).square().mean();
        const double sd = std::sqrt(var);
        if (sd > 0.0) {
            standardized.col(a) = (coords.col(a).array() - mean) / sd;
        } else {
            standardized.col(a).setZero();
        }
    }

    double total = 0.0;
    for (const auto& m : members) {
        if (m.size() < 2) continue;  // singleton: contributes 0, counts in N
        Matrix pts(static_cast<Index>(m.size()), 2);
        for (std::size_t j = 0; j < m.size(); ++j) {
            pts.row(static_cast<Index>(j)) = standardized.row(m[j]);
        }
        detail::BucketGrid grid(pts, detail::BucketGrid::default_bucket_size(pts));
        for (Index j = 0; j < pts.rows(); ++j) {
            total += grid.nearest_distance(j);
        }
    }
    return total / static_cast<double>(n);
}

double morans_i(const Vector& y, const SpatialGraph& g) {
    if (y.size() != g.size()) {
        throw std::invalid_argument("morans_i: value vector has " +
                                    std::to_string(y.size()) +
                                    " entries, graph has " +
                                    std::to_string(g.size()) + " nodes");
    }
    const Index n = y.size();
    const double mean = y.mean();
    const Vector z = y.array() - mean;
    const double variance = z.squaredNorm();
    if (variance <= 0.0) {
        throw std::invalid_argument("morans_i: y is constant (zero variance)");
    }
    double w_sum = 0.0;
    double cross = 0.0;
    for (Index i = 0; i < g.adjacency.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(g.adjacency, i); it; ++it) {
            w_sum += it.value();
            cross += it.value() * z[i] * z[it.col()];
        }
    }
    if (w_sum <= 0.0) {
        throw std::invalid_argument("morans_i: graph has zero total weight");
    }
    return (static_cast<double>(n) / w_sum) * (cross / variance);
}

double silhouette(const Matrix& embedding, const ClusterLabeling& labels,
                  Index max_sample, std::uint64_t seed) {
    require_rows(embedding.rows(), labels, "silhouette");
    if (labels.n_clusters < 2) {
        throw std::invalid_argument("silhouette: needs at least 2 clusters");
    }
    auto members = members_by_cluster(labels);
    const Index n = embedding.rows();

    // Stratified subsample, proportional with at least one cell per cluster.
    std::vector<Index> sample;
    std::vector<int> sample_label;
    if (n > max_sample) {
        Rng rng(seed);
        for (std::size_t c = 0; c < members.size(); ++c) {
            auto& m = members[c];
            const Index quota = std::max<Index>(
                1, static_cast<Index>(static_cast<double>(m.size()) *
                                      static_cast<double>(max_sample) /
                                      static_cast<double>(n)));
            rng.shuffle(m);
            std::sort(m.begin(), m.begin() + std::min<Index>(quota, m.size()));
            for (Index j = 0; j < std::min<Index>(quota, m.size()); ++j) {
                sample.push_back(m[static_cast<std::size_t>(j)]);
                sample_label.push_back(static_cast<int>(c));
            }
        }
    } else {
        for (std::size_t c = 0; c < members.size(); ++c) {
            for (Index i : members[c]) {
                sample.push_back(i);
                sample_label.push_back(static_cast<int>(c));
            }
        }
    }

    const Index s = static_cast<Index>(sample.size());
    Matrix pts(s, embedding.cols());
    for (Index i = 0; i < s; ++i) {
        pts.row(i) = embedding.row(sample[static_cast<std::size_t>(i)]);
    }
    std::vector<Index> counts(static_cast<std::size_t>(labels.n_clusters), 0);
    for (int l : sample_label) ++counts[static_cast<std::size_t>(l)];

    const Vector sq = pts.rowwise().squaredNorm();
    double total = 0.0;
    std::vector<double> dist_sum(static_cast<std::size_t>(labels.n_clusters));
    for (Index i = 0; i < s; ++i) {
        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        for (Index j = 0; j < s; ++j) {
            if (j == i) continue;
            const double d2 =
                std::max(0.0, sq[i] + sq[j] - 2.0 * pts.row(i).dot(pts.row(j)));
            dist_sum[static_cast<std::size_t>(
                sample_label[static_cast<std::size_t>(j)])] += std::sqrt(d2);
        }
        const int own = sample_label[static_cast<std::size_t>(i)];
        const Index own_count = counts[static_cast<std::size_t>(own)];
        if (own_count <= 1) continue;  // lone point scores 0
        const double a =
            dist_sum[static_cast<std::size_t>(own)] /
            static_cast<double>(own_count - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < labels.n_clusters; ++c) {
            if (c == own || counts[static_cast<std::size_t>(c)] == 0) continue;
            b = std::min(b, dist_sum[static_cast<std::size_t>(c)] /
                                static_cast<double>(
                                    counts[static_cast<std::size_t>(c)]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(s);
}

double dbi(const Matrix& embedding, const ClusterLabeling& labels) {
    require_rows(embedding.rows(), labels, "dbi");
    if (labels.n_clusters < 2) {
        throw std::invalid_argument("dbi: needs at least 2 clusters");
    }
    const auto members = members_by_cluster(labels);
    const Index kc = labels.n_clusters;
    Matrix centroids = Matrix::Zero(kc, embedding.cols());
    Vector scatter = Vector::Zero(kc);
    for (Index c = 0; c < kc; ++c) {
        const auto& m = members[static_cast<std::size_t>(c)];
        for (Index i : m) centroids.row(c) += embedding.row(i);
        centroids.row(c) /= static_cast<double>(m.size());
        double sum = 0.0;
        for (Index i : m) {
            sum += (embedding.row(i) - centroids.row(c)).norm();
        }
        scatter[c] = sum / static_cast<double>(m.size());
    }
    double total = 0.0;
    for (Index i = 0; i < kc; ++i) {
        double worst = 0.0;
        for (Index j = 0; j < kc; ++j) {
            if (j == i) continue;
            const double d = (centroids.row(i) - centroids.row(j)).norm();
            const double r =
                d > 0.0 ? (scatter[i] + scatter[j]) / d
                        : std::numeric_limits<double>::infinity();
            worst = std::max(worst, r);
        }
        total += worst;
    }
    return total / static_cast<double>(kc);
}

std::vector<std::vector<Index>> rank_genes(const Dataset& ds,
                                           const ClusterLabeling& labels,
                                           Index top_m) {
    require_rows(ds.n_cells(), labels, "rank_genes");
    if (!ds.is_lognorm) {
        throw std::invalid_argument("rank_genes: dataset must be log-normalized");
    }
    const auto members = members_by_cluster(labels);
    const Index p = ds.n_genes();
    const Index kc = labels.n_clusters;

    Matrix cluster_sum = Matrix::Zero(kc, p);
    for (Index i = 0; i < ds.counts.outerSize(); ++i) {
        const int c = labels.labels[static_cast<std::size_t>(i)];
        for (SparseMatrix::InnerIterator it(ds.counts, i); it; ++it) {
            cluster_sum(c, it.col()) += it.value();
        }
    }
    const Vector total_sum = cluster_sum.colwise().sum();

    std::vector<std::vector<Index>> out(static_cast<std::size_t>(kc));
    const Index m = std::min(top_m, p);
    std::vector<Index> order(static_cast<std::size_t>(p));
    for (Index c = 0; c < kc; ++c) {
        const double size = static_cast<double>(
            members[static_cast<std::size_t>(c)].size());
        const double rest = static_cast<double>(ds.n_cells()) - size;
        Vector diff(p);
        for (Index g = 0; g < p; ++g) {
            const double in_mean = cluster_sum(c, g) / size;
            const double rest_mean =
                rest > 0.0 ? (total_sum[g] - cluster_sum(c, g)) / rest : 0.0;
            diff[g] = in_mean - rest_mean;
        }
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            if (diff[a] != diff[b]) return diff[a] > diff[b];
            return a < b;
        });
        out[static_cast<std::size_t>(c)].assign(order.begin(),
                                                order.begin() + m);
    }
    return out;
}

namespace {

struct MarkerMatch {
    double coherence = 0.0;  // |top ∩ markers| / min(top_m, |markers|)
    double observed = 0.0;   // |top ∩ markers| / |top|
    double expected = 0.0;   // |markers| / n_genes
};

/// Best-matching marker set per cluster under the coherence score; ties go
/// to the lexicographically first cell type.
std::vector<MarkerMatch> best_matches(const Dataset& ds,
                                      const ClusterLabeling& labels,
                                      const MarkerSets& markers,
                                      Index top_m) {
    if (markers.empty()) {
        throw std::invalid_argument("marker metrics: marker sets are empty");
    }
    const auto by_index = marker_indices(ds, markers);
    const auto tops = rank_genes(ds, labels, top_m);
    const double p = static_cast<double>(ds.n_genes());

    std::vector<MarkerMatch> out;
    out.reserve(tops.size());
    for (const auto& top : tops) {
        const std::unordered_set<Index> top_set(top.begin(), top.end());
        MarkerMatch best;
        bool first = true;
        for (const auto& [type, ids] : by_index) {
            Index overlap = 0;
            for (Index g : ids) overlap += top_set.count(g) != 0 ? 1 : 0;
            MarkerMatch m;
            m.coherence = static_cast<double>(overlap) /
                          static_cast<double>(std::min<Index>(
                              static_cast<Index>(top.size()),
                              static_cast<Index>(ids.size())));
            m.observed = static_cast<double>(overlap) /
                         static_cast<double>(top.size());
            m.expected = static_cast<double>(ids.size()) / p;
            if (first || m.coherence > best.coherence) {
                best = m;
                first = false;
            }
        }
        out.push_back(best);
    }
    return out;
}

}  // namespace

double cmc(const Dataset& ds, const ClusterLabeling& labels,
           const MarkerSets& markers, Index top_m) {
    const auto matches = best_matches(ds, labels, markers, top_m);
    double total = 0.0;
    for (const auto& m : matches) total += m.coherence;
    return total / static_cast<double>(matches.size());
}

double mer(const Dataset& ds, const ClusterLabeling& labels,
           const MarkerSets& markers, Index top_m) {
    const auto by_index = marker_indices(ds, markers);
    const auto tops = rank_genes(ds, labels, top_m);
    std::unordered_set<Index> in_any_top;
    for (const auto& top : tops) in_any_top.insert(top.begin(), top.end());
    std::set<Index> all_markers;
    for (const auto& [type, ids] : by_index) {
        all_markers.insert(ids.begin(), ids.end());
    }
    Index excluded = 0;
    for (Index g : all_markers) {
        if (in_any_top.count(g) == 0) ++excluded;
    }
    return static_cast<double>(excluded) /
           static_cast<double>(all_markers.size());
}

double enrichment(const Dataset& ds, const ClusterLabeling& labels,
                  const MarkerSets& markers, Index top_m) {
    const auto matches = best_matches(ds, labels, markers, top_m);
    double total = 0.0;
    for (const auto& m : matches) total += m.observed / m.expected;
    return total / static_cast<double>(matches.size());
}

double ari(const std::vector<int>& labels_a,
           const std::vector<int>& labels_b) {
    if (labels_a.size() != labels_b.size()) {
        throw std::invalid_argument("ari: labelings differ in length");
    }
    if (labels_a.empty()) {
        throw std::invalid_argument("ari: empty labelings");
    }
    std::map<std::pair<int, int>, double> table;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < labels_a.size(); ++i) {
        table[{labels_a[i], labels_b[i]}] += 1.0;
        rows[labels_a[i]] += 1.0;
        cols[labels_b[i]] += 1.0;
    }
    auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, v] : table) sum_cells += comb2(v);
    for (const auto& [key, v] : rows) sum_rows += comb2(v);
    for (const auto& [key, v] : cols) sum_cols += comb2(v);
    const double total = comb2(static_cast<double>(labels_a.size()));
    const double expected = sum_rows * sum_cols / total;
    const double maximum = 0.5 * (sum_rows + sum_cols);
    if (maximum == expected) return 0.0;  // both labelings trivial
    return (sum_cells - expected) / (maximum - expected);
}

std::string metric_report_header() {
    return "method,k,resolution,clusters,chaos,morans_i,silhouette,dbi,cmc,"
           "mer,enrichment";
}

std::string to_csv_row(const MetricReport& r) {
    std::ostringstream out;
    out << r.method << ',' << r.k << ',' << format_double(r.resolution) << ','
        << r.n_clusters << ',' << format_double(r.chaos) << ','
        << format_double(r.morans_i) << ',' << format_double(r.silhouette)
        << ',' << format_double(r.dbi) << ',' << format_double(r.cmc) << ','
        << format_double(r.mer) << ',' << format_double(r.enrichment);
    return out.str();
}

MetricReport from_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (fields.size() != 11) {
        throw std::runtime_error("metric row has " +
                                 std::to_string(fields.size()) +
                                 " fields, expected 11");
    }
    MetricReport r;
    r.method = fields[0];
    r.k = std::stoll(fields[1]);
    r.resolution = std::stod(fields[2]);
    r.n_clusters = std::stoll(fields[3]);
    r.chaos = std::stod(fields[4]);
    r.morans_i = std::stod(fields[5]);
    r.silhouette = std::stod(fields[6]);
    r.dbi = std::stod(fields[7]);
    r.cmc = std::stod(fields[8]);
    r.mer = std::stod(fields[9]);
    r.enrichment = std::stod(fields[10]);
    return r;
}

std::string to_json_line(const MetricReport& r) {
    auto num = [](double v) {
        return std::isfinite(v) ? format_double(v) : std::string("null");
    };
    std::ostringstream out;
    out << "{\"method\":\"" << r.method << "\",\"k\":" << r.k
        << ",\"resolution\":" << num(r.resolution)
        << ",\"clusters\":" << r.n_clusters << ",\"chaos\":" << num(r.chaos)
        << ",\"morans_i\":" << num(r.morans_i)
        << ",\"silhouette\":" << num(r.silhouette) << ",\"dbi\":" << num(r.dbi)
        << ",\"cmc\":" << num(r.cmc) << ",\"mer\":" << num(r.mer)
        << ",\"enrichment\":" << num(r.enrichment) << "}";
    return out.str();
}

}  // namespace spatialnmf
