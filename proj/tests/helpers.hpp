#pragma once

#include "spatialnmf/rng.hpp"
#include "spatialnmf/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace test_support {

using spatialnmf::Index;
using spatialnmf::Matrix;
using spatialnmf::Rng;
using spatialnmf::SparseMatrix;
using spatialnmf::Vector;

inline SparseMatrix random_sparse_nonneg(Index n, Index p, double density,
                                         Rng& rng) {
    std::vector<Eigen::Triplet<double>> triplets;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
            if (rng.uniform() < density) {
                triplets.emplace_back(i, j, rng.uniform(0.1, 5.0));
            }
        }
    }
    SparseMatrix m(n, p);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

inline Matrix random_coords(Index n, double side, Rng& rng) {
    Matrix coords(n, 2);
    for (Index i = 0; i < n; ++i) {
        coords(i, 0) = rng.uniform(0.0, side);
        coords(i, 1) = rng.uniform(0.0, side);
    }
    return coords;
}

inline SparseMatrix sparse_from_dense(const Matrix& dense) {
    std::vector<Eigen::Triplet<double>> triplets;
    for (Index i = 0; i < dense.rows(); ++i) {
        for (Index j = 0; j < dense.cols(); ++j) {
            if (dense(i, j) != 0.0) triplets.emplace_back(i, j, dense(i, j));
        }
    }
    SparseMatrix m(dense.rows(), dense.cols());
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("spatialnmf_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const {
        return (path_ / name).string();
    }

private:
    std::filesystem::path path_;
};

}  // namespace test_support
