#include "spatialnmf/preprocess.hpp"

#include <cmath>
#include <unordered_set>

namespace spatialnmf {

namespace {

void require_raw(const Dataset& ds, const char* op) {
    if (ds.is_lognorm) {
        throw std::invalid_argument(std::string(op) +
                                    ": input is already log-normalized");
    }
}

Dataset select_columns(const Dataset& ds, const std::vector<Index>& keep) {
    Dataset out;
    out.cell_ids = ds.cell_ids;
    out.coords = ds.coords;
    out.is_lognorm = ds.is_lognorm;
    out.gene_names.reserve(keep.size());
    std::vector<Index> col_map(static_cast<std::size_t>(ds.n_genes()), -1);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        col_map[static_cast<std::size_t>(keep[k])] = static_cast<Index>(k);
        out.gene_names.push_back(ds.gene_names[static_cast<std::size_t>(keep[k])]);
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(ds.counts.nonZeros()));
    for (Index i = 0; i < ds.counts.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(ds.counts, i); it; ++it) {
            const Index c = col_map[static_cast<std::size_t>(it.col())];
            if (c >= 0) triplets.emplace_back(it.row(), c, it.value());
        }
    }
    out.counts = SparseMatrix(ds.n_cells(), static_cast<Index>(keep.size()));
    out.counts.setFromTriplets(triplets.begin(), triplets.end());
    out.counts.makeCompressed();
    return out;
}

Dataset select_rows(const Dataset& ds, const std::vector<Index>& keep) {
    Dataset out;
    out.gene_names = ds.gene_names;
    out.is_lognorm = ds.is_lognorm;
    out.cell_ids.reserve(keep.size());
    out.coords.resize(static_cast<Index>(keep.size()), 2);
    std::vector<Index> row_map(static_cast<std::size_t>(ds.n_cells()), -1);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        row_map[static_cast<std::size_t>(keep[k])] = static_cast<Index>(k);
        out.cell_ids.push_back(ds.cell_ids[static_cast<std::size_t>(keep[k])]);
        out.coords.row(static_cast<Index>(k)) = ds.coords.row(keep[k]);
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(ds.counts.nonZeros()));
    for (Index i = 0; i < ds.counts.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(ds.counts, i); it; ++it) {
            const Index r = row_map[static_cast<std::size_t>(it.row())];
            if (r >= 0) triplets.emplace_back(r, it.col(), it.value());
        }
    }
    out.counts = SparseMatrix(static_cast<Index>(keep.size()), ds.n_genes());
    out.counts.setFromTriplets(triplets.begin(), triplets.end());
    out.counts.makeCompressed();
    return out;
}

}  // namespace

Dataset filter_genes(const Dataset& ds, Index min_cells) {
    require_raw(ds, "filter_genes");
    std::vector<Index> support(static_cast<std::size_t>(ds.n_genes()), 0);
    for (Index i = 0; i < ds.counts.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(ds.counts, i); it; ++it) {
            if (it.value() != 0.0) ++support[static_cast<std::size_t>(it.col())];
        }
    }
    std::vector<Index> keep;
    for (Index g = 0; g < ds.n_genes(); ++g) {
        if (support[static_cast<std::size_t>(g)] >= min_cells) keep.push_back(g);
    }
    if (keep.empty()) {
        throw std::runtime_error(
            "filter_genes: no gene is detected in at least " +
            std::to_string(min_cells) + " cells");
    }
    return select_columns(ds, keep);
}

Dataset filter_cells(const Dataset& ds, Index min_genes) {
    require_raw(ds, "filter_cells");
    std::vector<Index> keep;
    for (Index i = 0; i < ds.counts.outerSize(); ++i) {
        Index detected = 0;
        for (SparseMatrix::InnerIterator it(ds.counts, i); it; ++it) {
            if (it.value() != 0.0) ++detected;
        }
        if (detected >= min_genes) keep.push_back(i);
    }
    if (keep.empty()) {
        throw std::runtime_error(
            "filter_cells: no cell has at least " +
            std::to_string(min_genes) + " detected genes");
    }
    return select_rows(ds, keep);
}

Dataset normalize_and_log(const Dataset& ds, double target_sum) {
    require_raw(ds, "normalize_and_log");
    if (target_sum <= 0.0) {
        throw std::invalid_argument("normalize_and_log: target_sum must be positive");
    }
    Dataset out = ds;
    for (Index i = 0; i < out.counts.outerSize(); ++i) {
        double total = 0.0;
        for (SparseMatrix::InnerIterator it(out.counts, i); it; ++it) {
            total += it.value();
        }
        if (total <= 0.0) {
            throw std::runtime_error(
                "normalize_and_log: cell '" +
                ds.cell_ids[static_cast<std::size_t>(i)] +
                "' has zero total count; run filter_cells first");
        }
        const double scale = target_sum / total;
        for (SparseMatrix::InnerIterator it(out.counts, i); it; ++it) {
            it.valueRef() = std::log1p(it.value() * scale);
        }
    }
    out.is_lognorm = true;
    return out;
}

Dataset drop_high_score_cells(
    const Dataset& ds, const std::unordered_map<std::string, double>& scores,
    double threshold) {
    std::vector<Index> keep;
    for (Index i = 0; i < ds.n_cells(); ++i) {
        auto it = scores.find(ds.cell_ids[static_cast<std::size_t>(i)]);
        if (it == scores.end() || it->second <= threshold) keep.push_back(i);
    }
    if (keep.empty()) {
        throw std::runtime_error("drop_high_score_cells: all cells removed");
    }
    return select_rows(ds, keep);
}

Dataset exclude_genes(const Dataset& ds,
                      const std::vector<std::string>& names) {
    std::unordered_set<std::string> drop(names.begin(), names.end());
    std::vector<Index> keep;
    for (Index g = 0; g < ds.n_genes(); ++g) {
        if (drop.count(ds.gene_names[static_cast<std::size_t>(g)]) == 0) {
            keep.push_back(g);
        }
    }
    if (keep.empty()) {
        throw std::runtime_error("exclude_genes: all genes removed");
    }
    return select_columns(ds, keep);
}

}  // namespace spatialnmf
