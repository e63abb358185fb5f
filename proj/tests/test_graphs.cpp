#include "spatialnmf/graphs.hpp"

#include <doctest.h>

#include <cmath>

#include "helpers.hpp"

using namespace spatialnmf;
using test_support::Rng;

namespace {

/// O(n^2) oracle for radius graphs.
Matrix dense_radius_oracle(const Matrix& coords, double r, EdgeWeight weight) {
    const Index n = coords.rows();
    Matrix a = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = coords(j, 0) - coords(i, 0);
            const double dy = coords(j, 1) - coords(i, 1);
            const double d = std::sqrt(dx * dx + dy * dy);
            if (d <= r) {
                a(i, j) = weight == EdgeWeight::unit
                              ? 1.0
                              : std::exp(-(d / r) * (d / r));
            }
        }
    }
    return a;
}

Matrix permutation_matrix(const std::vector<Index>& perm) {
    const Index n = static_cast<Index>(perm.size());
    Matrix p = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) p(i, perm[static_cast<std::size_t>(i)]) = 1.0;
    return p;
}

}  // namespace

TEST_CASE("radius graph edge presence follows the radius") {
    Matrix coords(2, 2);
    coords << 0, 0, 30, 0;
    CHECK(radius_graph(coords, 80.0).adjacency.nonZeros() == 2);
    CHECK(radius_graph(coords, 20.0).adjacency.nonZeros() == 0);
}

TEST_CASE("single cell yields an empty adjacency") {
    Matrix coords(1, 2);
    coords << 5, 5;
    CHECK(radius_graph(coords, 50.0).adjacency.nonZeros() == 0);
}

TEST_CASE("radius graph matches the brute-force oracle") {
    Rng rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix coords = test_support::random_coords(60, 200.0, rng);
        for (double r : {15.0, 40.0, 90.0}) {
            const SpatialGraph g = radius_graph(coords, r);
            const Matrix oracle = dense_radius_oracle(coords, r, EdgeWeight::gaussian);
            CHECK((Matrix(g.adjacency) - oracle).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("contact graph uses unit weights and a closed ball") {
    Matrix coords(3, 2);
    coords << 0, 0, 10, 0, 30, 0;
    const SpatialGraph g = contact_graph(coords, 20.0);
    CHECK(g.kind == GraphKind::contact);
    CHECK(g.adjacency.coeff(0, 1) == 1.0);
    CHECK(g.adjacency.coeff(1, 2) == 1.0);  // exactly 20 apart: edge present
    CHECK(g.adjacency.coeff(0, 2) == 0.0);
}

TEST_CASE("25-micron grid spacing has no contacts at radius 20") {
    Matrix coords(9, 2);
    Index r = 0;
    for (Index i = 0; i < 3; ++i) {
        for (Index j = 0; j < 3; ++j) coords.row(r++) << 25.0 * i, 25.0 * j;
    }
    CHECK(contact_graph(coords, 20.0).adjacency.nonZeros() == 0);
}

TEST_CASE("hybrid merge takes the elementwise maximum") {
    Matrix coords(2, 2);
    coords << 0, 0, 10, 0;
    const SpatialGraph contact = contact_graph(coords, 20.0);
    const SpatialGraph radius = radius_graph(coords, 80.0);
    const SpatialGraph hybrid = hybrid_merge(contact, radius);
    CHECK(hybrid.kind == GraphKind::hybrid);
    // contact weight 1.0 beats the gaussian radius weight
    CHECK(radius.adjacency.coeff(0, 1) < 1.0);
    CHECK(hybrid.adjacency.coeff(0, 1) == 1.0);
}

TEST_CASE("an edge in only one input keeps that weight") {
    Matrix coords(2, 2);
    coords << 0, 0, 50, 0;  // outside contact range, inside radius range
    const SpatialGraph contact = contact_graph(coords, 20.0);
    const SpatialGraph radius = radius_graph(coords, 80.0);
    const SpatialGraph hybrid = hybrid_merge(contact, radius);
    CHECK(hybrid.adjacency.coeff(0, 1) == radius.adjacency.coeff(0, 1));
}

TEST_CASE("hybrid merge equals dense max and is a semilattice") {
    Rng rng(103);
    const Matrix coords = test_support::random_coords(6, 100.0, rng);
    const SpatialGraph a = contact_graph(coords, 35.0);
    const SpatialGraph b = radius_graph(coords, 70.0);
    const Matrix oracle =
        Matrix(a.adjacency).cwiseMax(Matrix(b.adjacency));
    const SpatialGraph merged = hybrid_merge(a, b);
    CHECK(Matrix(merged.adjacency) == oracle);
    CHECK(Matrix(hybrid_merge(b, a).adjacency) == oracle);  // commutative
    CHECK(Matrix(hybrid_merge(merged, merged).adjacency) == oracle);  // idempotent
    const SpatialGraph c = radius_graph(coords, 45.0);
    CHECK(Matrix(hybrid_merge(hybrid_merge(a, b), c).adjacency) ==
          Matrix(hybrid_merge(a, hybrid_merge(b, c)).adjacency));
}

TEST_CASE("hybrid merge rejects mismatched node sets") {
    Matrix a(2, 2), b(3, 2);
    a.setZero();
    b.setZero();
    b.col(0) << 0, 100, 200;
    CHECK_THROWS_AS(hybrid_merge(contact_graph(a), contact_graph(b)),
                    std::invalid_argument);
}

TEST_CASE("spatial kNN on three collinear cells") {
    Matrix coords(3, 2);
    coords << 0, 0, 10, 0, 25, 0;
    const SpatialGraph g = spatial_knn_graph(coords, 1);
    CHECK(g.adjacency.coeff(0, 1) == 1.0);
    CHECK(g.adjacency.coeff(1, 0) == 1.0);
    CHECK(g.adjacency.coeff(2, 1) == 1.0);
    CHECK(g.adjacency.nonZeros() == 3);
}

TEST_CASE("k = n-1 gives the complete directed graph") {
    Rng rng(107);
    const Matrix coords = test_support::random_coords(8, 100.0, rng);
    const SpatialGraph g = spatial_knn_graph(coords, 7);
    CHECK(g.adjacency.nonZeros() == 8 * 7);
}

TEST_CASE("duplicate coordinates are each other's first neighbors") {
    Matrix coords(3, 2);
    coords << 5, 5, 5, 5, 100, 100;
    const SpatialGraph g = spatial_knn_graph(coords, 1);
    CHECK(g.adjacency.coeff(0, 1) == 1.0);
    CHECK(g.adjacency.coeff(1, 0) == 1.0);
}

TEST_CASE("spatial kNN rejects k >= n") {
    Matrix coords(3, 2);
    coords.setZero();
    CHECK_THROWS_AS(spatial_knn_graph(coords, 3), std::invalid_argument);
}

TEST_CASE("spatial kNN matches brute force with index tie-breaks") {
    Rng rng(109);
    for (int trial = 0; trial < 3; ++trial) {
        const Matrix coords = test_support::random_coords(50, 300.0, rng);
        const SpatialGraph g = spatial_knn_graph(coords, 5);
        for (Index i = 0; i < 50; ++i) {
            std::vector<std::pair<double, Index>> all;
            for (Index j = 0; j < 50; ++j) {
                if (j == i) continue;
                const double dx = coords(j, 0) - coords(i, 0);
                const double dy = coords(j, 1) - coords(i, 1);
                all.emplace_back(dx * dx + dy * dy, j);
            }
            std::sort(all.begin(), all.end());
            for (Index r = 0; r < 5; ++r) {
                CHECK(g.adjacency.coeff(i, all[static_cast<std::size_t>(r)].second) == 1.0);
            }
        }
    }
}

TEST_CASE("feature kNN connects identical latent rows mutually") {
    Matrix w(3, 2);
    w << 1, 1, 1, 1, 9, 9;
    const SpatialGraph g = feature_knn_graph(w, 1);
    CHECK(g.adjacency.coeff(0, 1) == 1.0);
    CHECK(g.adjacency.coeff(1, 0) == 1.0);
}

TEST_CASE("feature kNN with k=1 on separated pairs gives two mutual edges") {
    Matrix w(4, 3);
    w << 0, 0, 0, 0.1, 0, 0, 50, 50, 50, 50.1, 50, 50;
    const SpatialGraph g = feature_knn_graph(w, 1);
    CHECK(g.adjacency.nonZeros() == 4);
    CHECK(g.adjacency.coeff(0, 1) == 1.0);
    CHECK(g.adjacency.coeff(1, 0) == 1.0);
    CHECK(g.adjacency.coeff(2, 3) == 1.0);
    CHECK(g.adjacency.coeff(3, 2) == 1.0);
}

TEST_CASE("feature kNN is permutation-equivariant") {
    Rng rng(113);
    Matrix w(12, 4);
    for (Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(0.0, 2.0);
    std::vector<Index> perm(12);
    std::iota(perm.begin(), perm.end(), Index{0});
    rng.shuffle(perm);
    Matrix w_perm(12, 4);
    for (Index i = 0; i < 12; ++i) {
        w_perm.row(i) = w.row(perm[static_cast<std::size_t>(i)]);
    }
    const Matrix a = Matrix(feature_knn_graph(w, 3).adjacency);
    const Matrix a_perm = Matrix(feature_knn_graph(w_perm, 3).adjacency);
    for (Index i = 0; i < 12; ++i) {
        for (Index j = 0; j < 12; ++j) {
            CHECK(a_perm(i, j) == a(perm[static_cast<std::size_t>(i)],
                                    perm[static_cast<std::size_t>(j)]));
        }
    }
}

TEST_CASE("diffusion operator of an empty graph is the identity") {
    SpatialGraph empty;
    empty.adjacency = SparseMatrix(4, 4);
    const DiffusionOperator op = diffusion_operator(empty);
    CHECK(Matrix(op.P) == Matrix::Identity(4, 4));
}

TEST_CASE("diffusion operator splits evenly over a unit edge") {
    Matrix coords(2, 2);
    coords << 0, 0, 5, 0;
    const DiffusionOperator op = diffusion_operator(contact_graph(coords));
    CHECK(op.P.coeff(0, 0) == doctest::Approx(0.5));
    CHECK(op.P.coeff(0, 1) == doctest::Approx(0.5));
    CHECK(op.P.coeff(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("diffusion operator rows sum to one with a positive diagonal") {
    Rng rng(127);
    const Matrix coords = test_support::random_coords(80, 150.0, rng);
    const SpatialGraph g = radius_graph(coords, 40.0);
    const DiffusionOperator op = diffusion_operator(g);
    const Vector ones = Vector::Ones(80);
    const Vector sums = op.P * ones;
    CHECK((sums.array() - 1.0).abs().maxCoeff() <= 1e-9);
    for (Index i = 0; i < 80; ++i) CHECK(op.P.coeff(i, i) > 0.0);
    CHECK(Matrix(op.P).minCoeff() >= 0.0);
}

TEST_CASE("diffusion operator rejects self-loops") {
    SpatialGraph g;
    g.adjacency = SparseMatrix(2, 2);
    g.adjacency.insert(0, 0) = 1.0;
    CHECK_THROWS_AS(diffusion_operator(g), std::invalid_argument);
}

TEST_CASE("row_normalize divides nonempty rows by their sums") {
    Matrix dense(2, 3);
    dense << 2, 2, 0, 0, 0, 0;
    SpatialGraph g;
    g.adjacency = test_support::sparse_from_dense(dense);
    const SpatialGraph norm = row_normalize(g);
    CHECK(norm.is_row_stochastic);
    CHECK(norm.adjacency.coeff(0, 0) == 0.5);
    CHECK(norm.adjacency.coeff(0, 1) == 0.5);
    CHECK(Matrix(norm.adjacency).row(1).sum() == 0.0);
    // idempotence
    const SpatialGraph twice = row_normalize(norm);
    CHECK(Matrix(twice.adjacency) == Matrix(norm.adjacency));
}

TEST_CASE("row_normalize leaves every row sum in {0, 1}") {
    Rng rng(131);
    const SparseMatrix a = test_support::random_sparse_nonneg(8, 8, 0.4, rng);
    SpatialGraph g;
    g.adjacency = a;
    const SpatialGraph norm = row_normalize(g);
    for (Index i = 0; i < 8; ++i) {
        const double sum = Matrix(norm.adjacency).row(i).sum();
        CHECK((sum == 0.0 || std::abs(sum - 1.0) <= 1e-9));
    }
}

TEST_CASE("mix_adjacency endpoints and hand fixture") {
    Matrix dense_s(3, 3), dense_f(3, 3);
    dense_s << 0, 1, 1, 1, 0, 0, 1, 0, 0;
    dense_f << 0, 0, 2, 0, 0, 2, 2, 2, 0;
    SpatialGraph s, f;
    s.adjacency = test_support::sparse_from_dense(dense_s);
    f.adjacency = test_support::sparse_from_dense(dense_f);
    const SpatialGraph sn = row_normalize(s);
    const SpatialGraph fn = row_normalize(f);

    auto symmetrized = [](const SpatialGraph& g) {
        const Matrix m = Matrix(g.adjacency);
        return Matrix(0.5 * (m + m.transpose()));
    };

    SUBCASE("alpha=1 keeps only the spatial graph") {
        const SpatialGraph mixed = mix_adjacency(sn, fn, 1.0);
        CHECK(Matrix(mixed.adjacency) == symmetrized(sn));
        CHECK(mixed.kind == GraphKind::mixed);
    }
    SUBCASE("alpha=0 keeps only the feature graph") {
        const SpatialGraph mixed = mix_adjacency(sn, fn, 0.0);
        CHECK(Matrix(mixed.adjacency) == symmetrized(fn));
    }
    SUBCASE("alpha=0.5 equals the dense oracle") {
        const SpatialGraph mixed = mix_adjacency(sn, fn, 0.5);
        const Matrix blend =
            0.5 * Matrix(sn.adjacency) + 0.5 * Matrix(fn.adjacency);
        const Matrix oracle = 0.5 * (blend + blend.transpose());
        CHECK((Matrix(mixed.adjacency) - oracle).cwiseAbs().maxCoeff() <= 1e-15);
    }
    SUBCASE("mixing is entrywise linear in alpha") {
        const Matrix at_zero = Matrix(mix_adjacency(sn, fn, 0.0).adjacency);
        const Matrix at_one = Matrix(mix_adjacency(sn, fn, 1.0).adjacency);
        for (double alpha : {0.25, 0.4, 0.75}) {
            const Matrix got = Matrix(mix_adjacency(sn, fn, alpha).adjacency);
            const Matrix expect = alpha * at_one + (1.0 - alpha) * at_zero;
            CHECK((got - expect).cwiseAbs().maxCoeff() <= 1e-15);
        }
    }
    SUBCASE("alpha outside [0,1] is rejected") {
        CHECK_THROWS_AS(mix_adjacency(sn, fn, 1.5), std::invalid_argument);
        CHECK_THROWS_AS(mix_adjacency(sn, fn, -0.1), std::invalid_argument);
    }
    SUBCASE("inputs must be row-normalized") {
        CHECK_THROWS_AS(mix_adjacency(s, fn, 0.5), std::invalid_argument);
    }
}

TEST_CASE("graph construction is permutation-equivariant") {
    Rng rng(137);
    const Matrix coords = test_support::random_coords(20, 120.0, rng);
    std::vector<Index> perm(20);
    std::iota(perm.begin(), perm.end(), Index{0});
    rng.shuffle(perm);
    Matrix coords_perm(20, 2);
    for (Index i = 0; i < 20; ++i) {
        coords_perm.row(i) = coords.row(perm[static_cast<std::size_t>(i)]);
    }
    const Matrix a = Matrix(radius_graph(coords, 50.0).adjacency);
    const Matrix ap = Matrix(radius_graph(coords_perm, 50.0).adjacency);
    const Matrix p = permutation_matrix(perm);
    CHECK((ap - p * a * p.transpose()).cwiseAbs().maxCoeff() == 0.0);
}
