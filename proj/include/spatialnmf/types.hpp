#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spatialnmf {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Cell-by-gene expression matrix with per-cell spatial centroids.
///
/// Rows of `counts` follow `cell_ids`, columns follow `gene_names`, and
/// `coords` holds one (x, y) centroid per cell in micrometers, row-aligned
/// with `counts`.
struct Dataset {
    SparseMatrix counts;                  // n_cells x n_genes, entries >= 0
    std::vector<std::string> gene_names;  // size n_genes, unique
    std::vector<std::string> cell_ids;    // size n_cells, unique
    Matrix coords;                        // n_cells x 2, micrometers
    bool is_lognorm = false;

    Index n_cells() const { return counts.rows(); }
    Index n_genes() const { return counts.cols(); }
};

/// Checks the Dataset invariants (shape agreement, nonnegativity, unique
/// identifiers). Throws std::invalid_argument naming the first violation.
void validate(const Dataset& ds);

}  // namespace spatialnmf
