#include "spatialnmf/synthetic.hpp"

#include "spatialnmf/io.hpp"
#include "spatialnmf/nmf.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include "helpers.hpp"

using namespace spatialnmf;

TEST_CASE("noiseless stripes are separable by argmax gene block") {
    SyntheticSpec spec;
    spec.n_cells = 300;
    spec.n_genes = 20;
    spec.n_domains = 2;
    spec.layout = DomainLayout::stripes;
    spec.program_strength = 10.0;
    spec.noise_rate = 0.0;
    spec.seed = 1;
    const SyntheticData data = generate(spec);
    const Index block = 10;
    for (Index i = 0; i < spec.n_cells; ++i) {
        Index best_gene = -1;
        double best = -1.0;
        for (SparseMatrix::InnerIterator it(data.dataset.counts, i); it; ++it) {
            if (it.value() > best) {
                best = it.value();
                best_gene = it.col();
            }
        }
        REQUIRE(best_gene >= 0);  // a cell with no counts would be unusable
        CHECK(static_cast<int>(best_gene / block) ==
              data.truth[static_cast<std::size_t>(i)]);
    }
}

TEST_CASE("generation is deterministic for a fixed seed") {
    SyntheticSpec spec;
    spec.n_cells = 150;
    spec.n_genes = 24;
    spec.n_domains = 3;
    spec.layout = DomainLayout::voronoi;
    spec.noise_rate = 0.4;
    spec.seed = 99;
    const SyntheticData a = generate(spec);
    const SyntheticData b = generate(spec);
    CHECK(a.truth == b.truth);
    CHECK(a.dataset.coords == b.dataset.coords);
    CHECK(Matrix(a.dataset.counts) == Matrix(b.dataset.counts));
}

TEST_CASE("domains partition the cells and are never empty") {
    for (DomainLayout layout :
         {DomainLayout::voronoi, DomainLayout::stripes, DomainLayout::rings}) {
        SyntheticSpec spec;
        spec.n_cells = 200;
        spec.n_genes = 30;
        spec.n_domains = 5;
        spec.layout = layout;
        spec.seed = 7;
        const SyntheticData data = generate(spec);
        std::vector<Index> count(5, 0);
        for (int d : data.truth) {
            REQUIRE(d >= 0);
            REQUIRE(d < 5);
            ++count[static_cast<std::size_t>(d)];
        }
        for (Index c : count) CHECK(c > 0);
    }
}

TEST_CASE("median nearest-neighbor spacing lands near 15 micrometers") {
    SyntheticSpec spec;
    spec.n_cells = 2000;
    spec.n_genes = 8;
    spec.n_domains = 2;
    spec.seed = 3;
    const SyntheticData data = generate(spec);
    std::vector<double> nn;
    const Matrix& c = data.dataset.coords;
    for (Index i = 0; i < spec.n_cells; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < spec.n_cells; ++j) {
            if (i != j) best = std::min(best, (c.row(i) - c.row(j)).squaredNorm());
        }
        nn.push_back(std::sqrt(best));
    }
    std::nth_element(nn.begin(), nn.begin() + 1000, nn.end());
    CHECK(nn[1000] == doctest::Approx(15.0).epsilon(0.15));
}

TEST_CASE("the noiseless rate matrix has exactly rank n_domains") {
    SyntheticSpec spec;
    spec.n_cells = 120;
    spec.n_genes = 24;
    spec.n_domains = 4;
    spec.layout = DomainLayout::rings;
    spec.program_strength = 6.0;
    spec.noise_rate = 0.0;
    spec.seed = 13;
    const SyntheticData data = generate(spec);

    // Rebuild the rate matrix from the ground truth.
    const Index block = spec.n_genes / spec.n_domains;
    Matrix rate = Matrix::Zero(spec.n_cells, spec.n_genes);
    for (Index i = 0; i < spec.n_cells; ++i) {
        const Index d = data.truth[static_cast<std::size_t>(i)];
        rate.block(i, d * block, 1, block).setConstant(spec.program_strength);
    }
    Eigen::BDCSVD<Matrix> svd(rate);
    const Vector sv = svd.singularValues();
    CHECK(sv[spec.n_domains] <= 1e-9 * sv[0]);

    // And the rank-n_domains NMF reconstructs it to numerical zero.
    const FactorModel model =
        nmf_fit(test_support::sparse_from_dense(rate), spec.n_domains, 500, 0.0);
    const double rel = std::sqrt(model.loss_trace.back()) / rate.norm();
    CHECK(rel < 1e-6);
}

TEST_CASE("marker file mirrors the signature blocks") {
    SyntheticSpec spec;
    spec.n_cells = 60;
    spec.n_genes = 9;
    spec.n_domains = 3;
    spec.seed = 21;
    const SyntheticData data = generate(spec);
    REQUIRE(data.markers.sets.size() == 3);
    CHECK(data.markers.sets.at("domain_0") ==
          std::vector<std::string>{"gene_0", "gene_1", "gene_2"});
    CHECK(data.markers.sets.at("domain_2") ==
          std::vector<std::string>{"gene_6", "gene_7", "gene_8"});
}

TEST_CASE("spec invariants are enforced") {
    SyntheticSpec spec;
    spec.n_domains = 1;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    spec.n_domains = 10;
    spec.n_genes = 5;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("save_synthetic writes the ingestion formats") {
    SyntheticSpec spec;
    spec.n_cells = 40;
    spec.n_genes = 12;
    spec.n_domains = 2;
    spec.noise_rate = 0.2;
    spec.seed = 5;
    const SyntheticData data = generate(spec);
    test_support::TempDir dir;
    save_synthetic(data, dir.str());

    const Dataset loaded =
        load_dataset(dir.file("matrix.mtx"), dir.file("genes.txt"),
                     dir.file("cells.txt"), dir.file("coords.csv"));
    CHECK(loaded.n_cells() == 40);
    CHECK(loaded.n_genes() == 12);
    CHECK((Matrix(loaded.counts) - Matrix(data.dataset.counts))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    const MarkerSets markers = load_markers(dir.file("markers.tsv"));
    CHECK(markers.sets == data.markers.sets);
}
