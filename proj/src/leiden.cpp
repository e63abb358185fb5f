#include "spatialnmf/leiden.hpp"

#include "spatialnmf/rng.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <numeric>

namespace spatialnmf {

namespace {

/// CSR graph for one aggregation level. self_loop[u] holds the full
/// ordered-pair intra weight collapsed into u; strength[u] includes it, so
/// degree sums are preserved across levels.
struct WorkGraph {
    Index n = 0;
    std::vector<Index> offsets;
    std::vector<Index> targets;
    std::vector<double> weights;
    std::vector<double> self_loop;
    std::vector<double> strength;
};

WorkGraph level0_graph(const SparseMatrix& a) {
    WorkGraph g;
    g.n = a.rows();
    g.offsets.assign(static_cast<std::size_t>(g.n) + 1, 0);
    g.targets.reserve(static_cast<std::size_t>(a.nonZeros()));
    g.weights.reserve(static_cast<std::size_t>(a.nonZeros()));
    g.self_loop.assign(static_cast<std::size_t>(g.n), 0.0);
    g.strength.assign(static_cast<std::size_t>(g.n), 0.0);
    for (Index i = 0; i < g.n; ++i) {
        for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
            if (it.col() == i || it.value() == 0.0) continue;
            g.targets.push_back(it.col());
            g.weights.push_back(it.value());
            g.strength[static_cast<std::size_t>(i)] += it.value();
        }
        g.offsets[static_cast<std::size_t>(i) + 1] =
            static_cast<Index>(g.targets.size());
    }
    return g;
}

void validate_input(const SparseMatrix& a) {
    SparseMatrix t = SparseMatrix(a.transpose());
    if (t.nonZeros() != a.nonZeros()) {
        throw std::invalid_argument("leiden: adjacency must be symmetric");
    }
    for (Index i = 0; i < a.outerSize(); ++i) {
        SparseMatrix::InnerIterator it(a, i), jt(t, i);
        for (; it; ++it, ++jt) {
            if (it.value() < 0.0) {
                throw std::invalid_argument(
                    "leiden: negative weight at (" + std::to_string(i) +
                    ", " + std::to_string(it.col()) + ")");
            }
            if (it.col() == i && it.value() != 0.0) {
                throw std::invalid_argument(
                    "leiden: self-loop at node " + std::to_string(i));
            }
            const double scale =
                std::max(std::abs(it.value()), std::abs(jt.value()));
            if (jt.col() != it.col() ||
                std::abs(it.value() - jt.value()) > 1e-9 * std::max(scale, 1.0)) {
                throw std::invalid_argument("leiden: adjacency must be symmetric");
            }
        }
    }
}

/// One level of the algorithm: community state plus the move machinery.
class Partitioner {
public:
    Partitioner(const WorkGraph& g, double gamma, double total_weight)
        : g_(g), gamma_(gamma), inv_2m_(1.0 / total_weight) {}

    /// Seeds the partition; ids must be dense in [0, n_comms).
    void reset(const std::vector<Index>& comm, Index n_comms) {
        comm_ = comm;
        comm_strength_.assign(static_cast<std::size_t>(g_.n), 0.0);
        comm_size_.assign(static_cast<std::size_t>(g_.n), 0);
        for (Index v = 0; v < g_.n; ++v) {
            const Index c = comm_[static_cast<std::size_t>(v)];
            comm_strength_[static_cast<std::size_t>(c)] +=
                g_.strength[static_cast<std::size_t>(v)];
            comm_size_[static_cast<std::size_t>(c)] += 1;
        }
        n_comms_ = n_comms;
        spare_.clear();
    }

    /// Queue-based local moving; each accepted move strictly increases Q.
    /// Returns the number of moves.
    std::size_t local_move(Rng& rng) {
        std::vector<Index> order(static_cast<std::size_t>(g_.n));
        std::iota(order.begin(), order.end(), Index{0});
        rng.shuffle(order);
        std::deque<Index> queue(order.begin(), order.end());
        std::vector<char> queued(static_cast<std::size_t>(g_.n), 1);

        std::vector<double> comm_weight(static_cast<std::size_t>(g_.n), 0.0);
        std::vector<Index> touched;
        std::size_t moves = 0;

        while (!queue.empty()) {
            const Index v = queue.front();
            queue.pop_front();
            queued[static_cast<std::size_t>(v)] = 0;

            touched.clear();
            for (Index e = g_.offsets[static_cast<std::size_t>(v)];
                 e < g_.offsets[static_cast<std::size_t>(v) + 1]; ++e) {
                const Index c = comm_[static_cast<std::size_t>(
                    g_.targets[static_cast<std::size_t>(e)])];
                if (comm_weight[static_cast<std::size_t>(c)] == 0.0) {
                    touched.push_back(c);
                }
                comm_weight[static_cast<std::size_t>(c)] +=
                    g_.weights[static_cast<std::size_t>(e)];
            }

            const Index cur = comm_[static_cast<std::size_t>(v)];
            const double k_v = g_.strength[static_cast<std::size_t>(v)];
            const double eps = 1e-12 * std::max(k_v, 1e-30);
            const double stay =
                comm_weight[static_cast<std::size_t>(cur)] -
                gamma_ * k_v *
                    (comm_strength_[static_cast<std::size_t>(cur)] - k_v) *
                    inv_2m_;
            double best = stay;
            Index best_c = cur;
            for (const Index c : touched) {
                if (c == cur) continue;
                const double score =
                    comm_weight[static_cast<std::size_t>(c)] -
                    gamma_ * k_v *
                        comm_strength_[static_cast<std::size_t>(c)] * inv_2m_;
                if (score > best + eps) {
                    best = score;
                    best_c = c;
                }
            }
            // A fresh singleton community scores exactly 0.
            const bool to_empty =
                best < -eps && comm_size_[static_cast<std::size_t>(cur)] > 1;

            for (const Index c : touched) {
                comm_weight[static_cast<std::size_t>(c)] = 0.0;
            }
            if (to_empty) best_c = take_spare();
            if (best_c == cur) continue;

            move(v, best_c);
            ++moves;
            for (Index e = g_.offsets[static_cast<std::size_t>(v)];
                 e < g_.offsets[static_cast<std::size_t>(v) + 1]; ++e) {
                const Index u = g_.targets[static_cast<std::size_t>(e)];
                if (comm_[static_cast<std::size_t>(u)] != best_c &&
                    !queued[static_cast<std::size_t>(u)]) {
                    queue.push_back(u);
                    queued[static_cast<std::size_t>(u)] = 1;
                }
            }
        }
        return moves;
    }

    /// Leiden refinement: inside each community, well-connected singleton
    /// nodes greedily join the well-connected refined community with the
    /// largest positive gain. Returns the refined assignment, renumbered
    /// densely by first appearance, and its community count.
    std::pair<std::vector<Index>, Index> refine(Rng& rng) const {
        std::vector<Index> refined(static_cast<std::size_t>(g_.n));
        std::iota(refined.begin(), refined.end(), Index{0});
        std::vector<double> sub_strength = g_.strength;  // per refined comm
        std::vector<Index> sub_size(static_cast<std::size_t>(g_.n), 1);

        // Strength of each local-move community and each node's weight to
        // the rest of its community.
        std::vector<double> total_in_comm(static_cast<std::size_t>(g_.n), 0.0);
        for (Index v = 0; v < g_.n; ++v) {
            total_in_comm[static_cast<std::size_t>(
                comm_[static_cast<std::size_t>(v)])] +=
                g_.strength[static_cast<std::size_t>(v)];
        }
        std::vector<double> link_in_comm(static_cast<std::size_t>(g_.n), 0.0);
        std::vector<double> external(static_cast<std::size_t>(g_.n), 0.0);
        for (Index v = 0; v < g_.n; ++v) {
            double w = 0.0;
            for (Index e = g_.offsets[static_cast<std::size_t>(v)];
                 e < g_.offsets[static_cast<std::size_t>(v) + 1]; ++e) {
                const Index u = g_.targets[static_cast<std::size_t>(e)];
                if (comm_[static_cast<std::size_t>(u)] ==
                    comm_[static_cast<std::size_t>(v)]) {
                    w += g_.weights[static_cast<std::size_t>(e)];
                }
            }
            link_in_comm[static_cast<std::size_t>(v)] = w;
            external[static_cast<std::size_t>(v)] = w;
        }

        std::vector<Index> order(static_cast<std::size_t>(g_.n));
        std::iota(order.begin(), order.end(), Index{0});
        rng.shuffle(order);

        std::vector<double> cand_weight(static_cast<std::size_t>(g_.n), 0.0);
        std::vector<Index> touched;
        for (const Index v : order) {
            if (sub_size[static_cast<std::size_t>(
                    refined[static_cast<std::size_t>(v)])] != 1) {
                continue;  // only isolated nodes may merge
            }
            const Index c = comm_[static_cast<std::size_t>(v)];
            const double k_v = g_.strength[static_cast<std::size_t>(v)];
            const double k_c = total_in_comm[static_cast<std::size_t>(c)];
            const double eps = 1e-12 * std::max(k_v, 1e-30);
            if (link_in_comm[static_cast<std::size_t>(v)] <
                gamma_ * k_v * (k_c - k_v) * inv_2m_ - eps) {
                continue;  // v is not well connected within its community
            }
            touched.clear();
            for (Index e = g_.offsets[static_cast<std::size_t>(v)];
                 e < g_.offsets[static_cast<std::size_t>(v) + 1]; ++e) {
                const Index u = g_.targets[static_cast<std::size_t>(e)];
                if (comm_[static_cast<std::size_t>(u)] != c) continue;
                const Index d = refined[static_cast<std::size_t>(u)];
                if (cand_weight[static_cast<std::size_t>(d)] == 0.0) {
                    touched.push_back(d);
                }
                cand_weight[static_cast<std::size_t>(d)] +=
                    g_.weights[static_cast<std::size_t>(e)];
            }
            double best = eps;
            Index best_d = -1;
            const Index own = refined[static_cast<std::size_t>(v)];
            for (const Index d : touched) {
                if (d == own) continue;
                const double k_d = sub_strength[static_cast<std::size_t>(d)];
                if (external[static_cast<std::size_t>(d)] <
                    gamma_ * k_d * (k_c - k_d) * inv_2m_ -
                        1e-12 * std::max(k_d, 1e-30)) {
                    continue;  // candidate community not well connected
                }
                const double score =
                    cand_weight[static_cast<std::size_t>(d)] -
                    gamma_ * k_v * k_d * inv_2m_;
                if (score > best) {
                    best = score;
                    best_d = d;
                }
            }
            if (best_d >= 0) {
                external[static_cast<std::size_t>(best_d)] +=
                    link_in_comm[static_cast<std::size_t>(v)] -
                    2.0 * cand_weight[static_cast<std::size_t>(best_d)];
                sub_strength[static_cast<std::size_t>(best_d)] += k_v;
                sub_size[static_cast<std::size_t>(best_d)] += 1;
                sub_size[static_cast<std::size_t>(own)] -= 1;
                refined[static_cast<std::size_t>(v)] = best_d;
            }
            for (const Index d : touched) {
                cand_weight[static_cast<std::size_t>(d)] = 0.0;
            }
        }

        std::vector<Index> renumber(static_cast<std::size_t>(g_.n), -1);
        Index next = 0;
        for (Index v = 0; v < g_.n; ++v) {
            Index& slot = renumber[static_cast<std::size_t>(
                refined[static_cast<std::size_t>(v)])];
            if (slot < 0) slot = next++;
            refined[static_cast<std::size_t>(v)] = slot;
        }
        return {refined, next};
    }

    const std::vector<Index>& communities() const { return comm_; }

    Index count_communities() const {
        std::vector<char> seen(static_cast<std::size_t>(g_.n), 0);
        Index count = 0;
        for (Index v = 0; v < g_.n; ++v) {
            char& s = seen[static_cast<std::size_t>(comm_[static_cast<std::size_t>(v)])];
            if (!s) {
                s = 1;
                ++count;
            }
        }
        return count;
    }

private:
    void move(Index v, Index to) {
        const Index from = comm_[static_cast<std::size_t>(v)];
        const double k_v = g_.strength[static_cast<std::size_t>(v)];
        comm_strength_[static_cast<std::size_t>(from)] -= k_v;
        comm_size_[static_cast<std::size_t>(from)] -= 1;
        if (comm_size_[static_cast<std::size_t>(from)] == 0) {
            spare_.push_back(from);
        }
        comm_strength_[static_cast<std::size_t>(to)] += k_v;
        comm_size_[static_cast<std::size_t>(to)] += 1;
        comm_[static_cast<std::size_t>(v)] = to;
    }

    Index take_spare() {
        while (!spare_.empty()) {
            const Index c = spare_.back();
            if (comm_size_[static_cast<std::size_t>(c)] == 0) return c;
            spare_.pop_back();
        }
        // All ids in [0, n) are in use only when every node is a singleton,
        // in which case no move-to-empty is ever requested.
        return n_comms_ < g_.n ? n_comms_++ : g_.n - 1;
    }

    const WorkGraph& g_;
    double gamma_;
    double inv_2m_;
    std::vector<Index> comm_;
    std::vector<double> comm_strength_;
    std::vector<Index> comm_size_;
    std::vector<Index> spare_;
    Index n_comms_ = 0;
};

/// Collapses refined communities into aggregate nodes; keeps self-loop and
/// strength bookkeeping so Q is identical across levels.
WorkGraph aggregate(const WorkGraph& g, const std::vector<Index>& refined,
                    Index n_refined) {
    WorkGraph out;
    out.n = n_refined;
    out.self_loop.assign(static_cast<std::size_t>(n_refined), 0.0);
    out.strength.assign(static_cast<std::size_t>(n_refined), 0.0);
    std::vector<std::map<Index, double>> rows(
        static_cast<std::size_t>(n_refined));
    for (Index v = 0; v < g.n; ++v) {
        const Index cv = refined[static_cast<std::size_t>(v)];
        out.self_loop[static_cast<std::size_t>(cv)] +=
            g.self_loop[static_cast<std::size_t>(v)];
        out.strength[static_cast<std::size_t>(cv)] +=
            g.strength[static_cast<std::size_t>(v)];
        for (Index e = g.offsets[static_cast<std::size_t>(v)];
             e < g.offsets[static_cast<std::size_t>(v) + 1]; ++e) {
            const Index cu =
                refined[static_cast<std::size_t>(g.targets[static_cast<std::size_t>(e)])];
            const double w = g.weights[static_cast<std::size_t>(e)];
            if (cu == cv) {
                out.self_loop[static_cast<std::size_t>(cv)] += w;
            } else {
                rows[static_cast<std::size_t>(cv)][cu] += w;
            }
        }
    }
    out.offsets.assign(static_cast<std::size_t>(n_refined) + 1, 0);
    for (Index c = 0; c < n_refined; ++c) {
        for (const auto& [target, w] : rows[static_cast<std::size_t>(c)]) {
            out.targets.push_back(target);
            out.weights.push_back(w);
        }
        out.offsets[static_cast<std::size_t>(c) + 1] =
            static_cast<Index>(out.targets.size());
    }
    return out;
}

/// Splits any disconnected community into its connected components. With
/// gamma > 0 this never lowers Q; it enforces the connectivity contract.
void split_disconnected(const SparseMatrix& a, std::vector<int>& labels) {
    const Index n = a.rows();
    std::vector<Index> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), Index{0});
    std::function<Index(Index)> find = [&](Index x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (Index i = 0; i < a.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
            if (it.value() == 0.0 || it.col() == i) continue;
            if (labels[static_cast<std::size_t>(i)] ==
                labels[static_cast<std::size_t>(it.col())]) {
                parent[static_cast<std::size_t>(find(i))] = find(it.col());
            }
        }
    }
    std::vector<int> renumbered(static_cast<std::size_t>(n));
    std::map<std::pair<int, Index>, int> component_label;
    int next = 0;
    for (Index i = 0; i < n; ++i) {
        const std::pair<int, Index> key{labels[static_cast<std::size_t>(i)],
                                        find(i)};
        auto [it, inserted] = component_label.emplace(key, next);
        if (inserted) ++next;
        renumbered[static_cast<std::size_t>(i)] = it->second;
    }
    labels = std::move(renumbered);
}

void renumber_by_first_appearance(std::vector<int>& labels, int& n_clusters) {
    std::vector<int> map(labels.size(), -1);
    int next = 0;
    for (auto& l : labels) {
        if (map[static_cast<std::size_t>(l)] < 0) {
            map[static_cast<std::size_t>(l)] = next++;
        }
        l = map[static_cast<std::size_t>(l)];
    }
    n_clusters = next;
}

}  // namespace

double modularity(const SpatialGraph& a, const std::vector<int>& labels,
                  double resolution) {
    const SparseMatrix& m = a.adjacency;
    if (static_cast<Index>(labels.size()) != m.rows()) {
        throw std::invalid_argument("modularity: labels must cover all nodes");
    }
    const int n_comms =
        labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<double> intra(static_cast<std::size_t>(n_comms), 0.0);
    std::vector<double> strength_sum(static_cast<std::size_t>(n_comms), 0.0);
    double total = 0.0;
    for (Index i = 0; i < m.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(m, i); it; ++it) {
            total += it.value();
            strength_sum[static_cast<std::size_t>(
                labels[static_cast<std::size_t>(i)])] += it.value();
            if (labels[static_cast<std::size_t>(i)] ==
                labels[static_cast<std::size_t>(it.col())]) {
                intra[static_cast<std::size_t>(
                    labels[static_cast<std::size_t>(i)])] += it.value();
            }
        }
    }
    if (total <= 0.0) return 0.0;
    double q = 0.0;
    for (std::size_t c = 0; c < intra.size(); ++c) {
        q += intra[c] - resolution * strength_sum[c] * strength_sum[c] / total;
    }
    return q / total;
}

ClusterLabeling leiden(const SpatialGraph& a, double resolution,
                       std::uint64_t seed, int max_passes,
                       std::vector<double>* quality_trace) {
    if (resolution <= 0.0) {
        throw std::invalid_argument("leiden: resolution must be positive");
    }
    validate_input(a.adjacency);

    ClusterLabeling result;
    result.resolution = resolution;
    result.seed = seed;
    const Index n = a.adjacency.rows();
    result.labels.assign(static_cast<std::size_t>(n), 0);

    WorkGraph g = level0_graph(a.adjacency);
    const double total_weight =
        std::accumulate(g.strength.begin(), g.strength.end(), 0.0);
    if (total_weight <= 0.0 || n == 0) {
        for (Index i = 0; i < n; ++i) {
            result.labels[static_cast<std::size_t>(i)] = static_cast<int>(i);
        }
        result.n_clusters = static_cast<int>(n);
        return result;
    }

    Rng rng(seed);
    std::vector<Index> orig_to_level(static_cast<std::size_t>(n));
    std::iota(orig_to_level.begin(), orig_to_level.end(), Index{0});

    std::vector<Index> part(static_cast<std::size_t>(n));
    std::iota(part.begin(), part.end(), Index{0});
    Index part_count = n;

    for (int pass = 0; pass < max_passes; ++pass) {
        Partitioner partitioner(g, resolution, total_weight);
        partitioner.reset(part, part_count);
        const std::size_t moves = partitioner.local_move(rng);
        part = partitioner.communities();
        const Index n_comms = partitioner.count_communities();

        if (quality_trace != nullptr) {
            std::vector<int> labels(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i) {
                labels[static_cast<std::size_t>(i)] = static_cast<int>(
                    part[static_cast<std::size_t>(
                        orig_to_level[static_cast<std::size_t>(i)])]);
            }
            int dummy = 0;
            renumber_by_first_appearance(labels, dummy);
            quality_trace->push_back(modularity(a, labels, resolution));
        }

        if (n_comms == g.n) break;  // nothing left to coarsen
        auto [refined, n_refined] = partitioner.refine(rng);
        if (n_refined == g.n && moves == 0) break;

        // Project the partition onto the refined aggregate nodes.
        std::vector<Index> agg_part(static_cast<std::size_t>(n_refined), -1);
        for (Index v = 0; v < g.n; ++v) {
            agg_part[static_cast<std::size_t>(refined[static_cast<std::size_t>(v)])] =
                part[static_cast<std::size_t>(v)];
        }
        std::vector<Index> renumber(static_cast<std::size_t>(g.n), -1);
        Index next = 0;
        for (Index c = 0; c < n_refined; ++c) {
            Index& slot =
                renumber[static_cast<std::size_t>(agg_part[static_cast<std::size_t>(c)])];
            if (slot < 0) slot = next++;
            agg_part[static_cast<std::size_t>(c)] = slot;
        }

        g = aggregate(g, refined, n_refined);
        for (auto& lvl : orig_to_level) {
            lvl = refined[static_cast<std::size_t>(lvl)];
        }
        part = std::move(agg_part);
        part_count = next;
    }

    for (Index i = 0; i < n; ++i) {
        result.labels[static_cast<std::size_t>(i)] = static_cast<int>(
            part[static_cast<std::size_t>(orig_to_level[static_cast<std::size_t>(i)])]);
    }
    split_disconnected(a.adjacency, result.labels);
    renumber_by_first_appearance(result.labels, result.n_clusters);
    return result;
}

}  // namespace spatialnmf
