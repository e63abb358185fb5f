#include "spatialnmf/smoothing.hpp"

#include <doctest.h>

#include "helpers.hpp"

using namespace spatialnmf;
using test_support::Rng;

namespace {

SpatialGraph graph_from_dense(const Matrix& dense, GraphKind kind) {
    SpatialGraph g;
    g.adjacency = test_support::sparse_from_dense(dense);
    g.kind = kind;
    return g;
}

double dirichlet_energy(const SpatialGraph& g, const Matrix& w) {
    double total = 0.0;
    for (Index i = 0; i < g.adjacency.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(g.adjacency, i); it; ++it) {
            total += it.value() *
                     (w.row(i) - w.row(it.col())).squaredNorm();
        }
    }
    return total;
}

}  // namespace

TEST_CASE("averaging a constant embedding changes nothing") {
    Matrix w = Matrix::Constant(5, 3, 0.7);
    Matrix adj = Matrix::Ones(5, 5) - Matrix::Identity(5, 5);
    const SmoothedFactors out =
        snmf_smooth(w, graph_from_dense(adj, GraphKind::spatial_knn));
    CHECK((out.W_s - w).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(out.method == SmoothingMethod::snmf_average);
}

TEST_CASE("neighbor average excludes the cell itself") {
    Matrix w(3, 2);
    w << 9, 9, 1, 0, 0, 1;  // cell 0's own row must not contribute
    Matrix adj = Matrix::Zero(3, 3);
    adj(0, 1) = adj(0, 2) = 1.0;
    adj(1, 0) = adj(2, 0) = 1.0;
    const SmoothedFactors out =
        snmf_smooth(w, graph_from_dense(adj, GraphKind::spatial_knn));
    CHECK(out.W_s(0, 0) == doctest::Approx(0.5));
    CHECK(out.W_s(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("complete graph minus self gives the leave-one-out mean") {
    Rng rng(211);
    Matrix w(7, 3);
    for (Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(0.0, 4.0);
    Matrix adj = Matrix::Ones(7, 7) - Matrix::Identity(7, 7);
    const SmoothedFactors out =
        snmf_smooth(w, graph_from_dense(adj, GraphKind::spatial_knn));
    const Vector colsum = w.colwise().sum();
    for (Index i = 0; i < 7; ++i) {
        const Vector expect = (colsum - w.row(i).transpose()) / 6.0;
        CHECK((out.W_s.row(i).transpose() - expect).cwiseAbs().maxCoeff() <=
              1e-9);
    }
}

TEST_CASE("isolated cells keep their row") {
    Matrix w(2, 2);
    w << 3, 4, 5, 6;
    const SmoothedFactors out = snmf_smooth(
        w, graph_from_dense(Matrix::Zero(2, 2), GraphKind::spatial_knn));
    CHECK(out.W_s == w);
}

TEST_CASE("diffuse with beta=0 or P=I is the identity") {
    Rng rng(223);
    Matrix w(6, 2);
    for (Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(0.0, 3.0);
    SpatialGraph empty;
    empty.adjacency = SparseMatrix(6, 6);
    const DiffusionOperator identity = diffusion_operator(empty);

    Matrix coords(6, 2);
    for (Index i = 0; i < 6; ++i) coords.row(i) << 10.0 * i, 0.0;
    const DiffusionOperator chain =
        diffusion_operator(contact_graph(coords, 12.0));

    CHECK(diffuse(w, chain, 0.0, 5).W_s == w);
    CHECK(diffuse(w, identity, 0.8, 3).W_s == w);
}

TEST_CASE("one diffusion step on a 3-node path, by hand") {
    // Path 0-1-2 with unit edges: P rows (1/2,1/2,0), (1/3,1/3,1/3),
    // (0,1/2,1/2). With W = e1 and beta=0.8 one step gives (0.6, 4/15, 0).
    Matrix adj = Matrix::Zero(3, 3);
    adj(0, 1) = adj(1, 0) = 1.0;
    adj(1, 2) = adj(2, 1) = 1.0;
    const DiffusionOperator op =
        diffusion_operator(graph_from_dense(adj, GraphKind::contact));
    Matrix w = Matrix::Zero(3, 1);
    w(0, 0) = 1.0;
    const SmoothedFactors out = diffuse(w, op, 0.8, 1);
    CHECK(out.W_s(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(out.W_s(1, 0) == doctest::Approx(0.8 / 3.0).epsilon(1e-12));
    CHECK(out.W_s(2, 0) == 0.0);
    CHECK(out.beta == 0.8);
    CHECK(out.steps == 1);
}

TEST_CASE("diffusion output stays nonnegative and the clip is a no-op") {
    Rng rng(227);
    const Matrix coords = test_support::random_coords(40, 100.0, rng);
    const SpatialGraph g = radius_graph(coords, 30.0);
    const DiffusionOperator op = diffusion_operator(g);
    Matrix w(40, 4);
    for (Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(0.0, 2.0);
    const SmoothedFactors out = diffuse(w, op, 0.8, 2);
    CHECK(out.W_s.minCoeff() >= 0.0);
    // Unclipped reference computed densely.
    Matrix ref = w;
    const Matrix p = Matrix(op.P);
    for (int t = 0; t < 2; ++t) ref = 0.2 * ref + 0.8 * (p * ref);
    CHECK((out.W_s - ref).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(ref.minCoeff() >= -1e-12);
}

TEST_CASE("diffusion does not increase Dirichlet energy on a connected graph") {
    Rng rng(229);
    for (int trial = 0; trial < 3; ++trial) {
        // Chain plus random chords: always connected.
        Matrix adj = Matrix::Zero(12, 12);
        for (Index i = 0; i + 1 < 12; ++i) adj(i, i + 1) = adj(i + 1, i) = 1.0;
        for (int extra = 0; extra < 6; ++extra) {
            const Index a = static_cast<Index>(rng.uniform_index(12));
            const Index b = static_cast<Index>(rng.uniform_index(12));
            if (a != b) adj(a, b) = adj(b, a) = 1.0;
        }
        const SpatialGraph g = graph_from_dense(adj, GraphKind::hybrid);
        const DiffusionOperator op = diffusion_operator(g);
        Matrix w(12, 3);
        for (Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(0.0, 5.0);
        const double before = dirichlet_energy(g, w);
        for (double beta : {0.2, 0.5, 0.8, 1.0}) {
            const double after = dirichlet_energy(g, diffuse(w, op, beta, 1).W_s);
            CHECK(after <= before + 1e-9);
        }
    }
}

TEST_CASE("diffusing a steps then b equals a+b steps") {
    Rng rng(233);
    const Matrix coords = test_support::random_coords(25, 80.0, rng);
    const DiffusionOperator op =
        diffusion_operator(radius_graph(coords, 30.0));
    Matrix w(25, 2);
    for (Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(0.0, 1.0);
    const Matrix two_then_one =
        diffuse(diffuse(w, op, 0.8, 2).W_s, op, 0.8, 1).W_s;
    const Matrix three = diffuse(w, op, 0.8, 3).W_s;
    CHECK((two_then_one - three).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("constant factors are a fixed point of both smoothers") {
    const Matrix w = Matrix::Constant(10, 3, 2.5);
    Matrix coords(10, 2);
    for (Index i = 0; i < 10; ++i) coords.row(i) << 12.0 * i, 0.0;
    const DiffusionOperator op =
        diffusion_operator(contact_graph(coords, 15.0));
    CHECK((diffuse(w, op, 0.8, 2).W_s - w).cwiseAbs().maxCoeff() <= 1e-12);
    const SpatialGraph knn = spatial_knn_graph(coords, 3);
    CHECK((snmf_smooth(w, knn).W_s - w).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("shape and parameter validation") {
    SpatialGraph empty;
    empty.adjacency = SparseMatrix(4, 4);
    const DiffusionOperator op = diffusion_operator(empty);
    CHECK_THROWS_AS(diffuse(Matrix::Zero(5, 2), op), std::invalid_argument);
    CHECK_THROWS_AS(diffuse(Matrix::Zero(4, 2), op, 1.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(snmf_smooth(Matrix::Zero(5, 2), empty),
                    std::invalid_argument);
}
