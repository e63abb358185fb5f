#include "spatialnmf/preprocess.hpp"

#include <doctest.h>

#include <cmath>

#include "helpers.hpp"

using namespace spatialnmf;

namespace {

Dataset make_dataset(const Matrix& dense) {
    Dataset ds;
    ds.counts = test_support::sparse_from_dense(dense);
    for (Index g = 0; g < dense.cols(); ++g) {
        ds.gene_names.push_back("g" + std::to_string(g));
    }
    for (Index i = 0; i < dense.rows(); ++i) {
        ds.cell_ids.push_back("c" + std::to_string(i));
    }
    ds.coords = Matrix::Zero(dense.rows(), 2);
    for (Index i = 0; i < dense.rows(); ++i) ds.coords(i, 0) = double(i);
    return ds;
}

}  // namespace

TEST_CASE("filter_genes drops genes below the support threshold") {
    // Per-gene supports 1, 2, 3, 4, 0, 5 across six cells.
    Matrix dense = Matrix::Zero(6, 6);
    for (Index g = 0; g < 6; ++g) {
        const Index support = (g == 4) ? 0 : (g == 5 ? 5 : g + 1);
        for (Index i = 0; i < support; ++i) dense(i, g) = 1.0;
    }
    const Dataset ds = make_dataset(dense);

    SUBCASE("min_cells=3 keeps supports {3,4,5}") {
        const Dataset out = filter_genes(ds, 3);
        CHECK(out.gene_names == std::vector<std::string>{"g2", "g3", "g5"});
    }
    SUBCASE("a gene seen in only 2 cells is dropped at the default") {
        const Dataset out = filter_genes(ds, 3);
        for (const auto& g : out.gene_names) CHECK(g != "g1");
    }
    SUBCASE("min_cells=0 is the identity") {
        const Dataset out = filter_genes(ds, 0);
        CHECK(out.gene_names == ds.gene_names);
        CHECK(Matrix(out.counts) == dense);
    }
    SUBCASE("idempotent for fixed min_cells") {
        const Dataset once = filter_genes(ds, 3);
        const Dataset twice = filter_genes(once, 3);
        CHECK(once.gene_names == twice.gene_names);
        CHECK(Matrix(once.counts) == Matrix(twice.counts));
    }
    SUBCASE("dropping everything is an error") {
        CHECK_THROWS_AS(filter_genes(ds, 100), std::runtime_error);
    }
}

TEST_CASE("filter_cells keeps cells with enough detected genes") {
    // Per-cell supports 1, 2, 3, 4.
    Matrix dense = Matrix::Zero(4, 4);
    for (Index i = 0; i < 4; ++i) {
        for (Index g = 0; g <= i; ++g) dense(i, g) = 2.0;
    }
    const Dataset ds = make_dataset(dense);

    SUBCASE("min_genes=3 keeps the last two cells with their coords") {
        const Dataset out = filter_cells(ds, 3);
        CHECK(out.cell_ids == std::vector<std::string>{"c2", "c3"});
        CHECK(out.coords(0, 0) == 2.0);
        CHECK(out.coords(1, 0) == 3.0);
    }
    SUBCASE("a cell just under the threshold is dropped") {
        Matrix wide = Matrix::Zero(2, 200);
        for (Index g = 0; g < 199; ++g) wide(0, g) = 1.0;  // 199 genes
        for (Index g = 0; g < 200; ++g) wide(1, g) = 1.0;  // 200 genes
        const Dataset out = filter_cells(make_dataset(wide), 200);
        CHECK(out.cell_ids == std::vector<std::string>{"c1"});
    }
    SUBCASE("min_genes=0 is the identity") {
        const Dataset out = filter_cells(ds, 0);
        CHECK(out.cell_ids == ds.cell_ids);
    }
    SUBCASE("row order of coords follows counts after filtering") {
        const Dataset out = filter_cells(ds, 2);
        REQUIRE(out.n_cells() == 3);
        for (Index i = 0; i < 3; ++i) {
            CHECK(out.coords(i, 0) == double(i + 1));
        }
    }
}

TEST_CASE("normalize_and_log scales to the target and applies log1p") {
    Matrix dense(1, 3);
    dense << 2, 3, 5;
    const Dataset out = normalize_and_log(make_dataset(dense), 10000.0);
    CHECK(out.counts.coeff(0, 0) == doctest::Approx(std::log(2001.0)).epsilon(1e-12));
    CHECK(out.counts.coeff(0, 1) == doctest::Approx(std::log(3001.0)).epsilon(1e-12));
    CHECK(out.counts.coeff(0, 2) == doctest::Approx(std::log(5001.0)).epsilon(1e-12));
    CHECK(out.is_lognorm);
}

TEST_CASE("a single nonzero absorbs the full mass") {
    Matrix dense(1, 3);
    dense << 0, 0, 7;
    const Dataset out = normalize_and_log(make_dataset(dense));
    CHECK(out.counts.coeff(0, 0) == 0.0);
    CHECK(out.counts.coeff(0, 1) == 0.0);
    CHECK(out.counts.coeff(0, 2) ==
          doctest::Approx(std::log(10001.0)).epsilon(1e-12));
}

TEST_CASE("a cell already at the target only gets log1p") {
    Matrix dense(1, 2);
    dense << 4000, 6000;
    const Dataset out = normalize_and_log(make_dataset(dense), 10000.0);
    CHECK(out.counts.coeff(0, 0) == doctest::Approx(std::log1p(4000.0)));
    CHECK(out.counts.coeff(0, 1) == doctest::Approx(std::log1p(6000.0)));
}

TEST_CASE("normalize_and_log rejects zero-total cells") {
    Matrix dense = Matrix::Zero(2, 2);
    dense(0, 0) = 1.0;
    CHECK_THROWS_WITH_AS(normalize_and_log(make_dataset(dense)),
                         doctest::Contains("filter_cells"),
                         std::runtime_error);
}

TEST_CASE("normalize_and_log preserves the zero pattern and cell totals") {
    test_support::Rng rng(11);
    const SparseMatrix counts =
        test_support::random_sparse_nonneg(30, 20, 0.3, rng);
    Dataset ds;
    ds.counts = counts;
    for (Index g = 0; g < 20; ++g) ds.gene_names.push_back("g" + std::to_string(g));
    for (Index i = 0; i < 30; ++i) ds.cell_ids.push_back("c" + std::to_string(i));
    ds.coords = Matrix::Zero(30, 2);
    const Dataset filtered = filter_cells(ds, 1);
    const Dataset out = normalize_and_log(filtered, 10000.0);

    CHECK(out.counts.nonZeros() == filtered.counts.nonZeros());
    for (Index i = 0; i < out.counts.outerSize(); ++i) {
        double back_total = 0.0;
        SparseMatrix::InnerIterator orig(filtered.counts, i);
        for (SparseMatrix::InnerIterator it(out.counts, i); it; ++it, ++orig) {
            CHECK(it.col() == orig.col());  // pattern preserved exactly
            back_total += std::expm1(it.value());
        }
        CHECK(back_total == doctest::Approx(10000.0).epsilon(1e-6));
    }
}

TEST_CASE("doublet-style score column drops flagged cells") {
    Matrix dense = Matrix::Ones(3, 2);
    const Dataset ds = make_dataset(dense);
    const Dataset out =
        drop_high_score_cells(ds, {{"c0", 0.1}, {"c1", 0.25}}, 0.2);
    CHECK(out.cell_ids == std::vector<std::string>{"c0", "c2"});
}

TEST_CASE("exclude_genes removes named columns") {
    Matrix dense = Matrix::Ones(2, 3);
    const Dataset out = exclude_genes(make_dataset(dense), {"g1", "missing"});
    CHECK(out.gene_names == std::vector<std::string>{"g0", "g2"});
}
