#pragma once

#include "spatialnmf/metrics.hpp"
#include "spatialnmf/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spatialnmf {

enum class DomainLayout { voronoi, stripes, rings };

/// Recipe for a synthetic spatial expression dataset with known domains.
struct SyntheticSpec {
    Index n_cells = 1000;
    Index n_genes = 50;
    Index n_domains = 4;
    DomainLayout layout = DomainLayout::voronoi;
    double program_strength = 10.0;
    double noise_rate = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    Dataset dataset;
    std::vector<int> truth;  // per-cell domain label
    MarkerSets markers;      // each domain's signature gene block
};

/// Cells are placed uniformly in a square sized so the median
/// nearest-neighbor spacing is about 15 micrometers; each domain owns a
/// disjoint block of floor(n_genes / n_domains) signature genes; counts are
/// Poisson with rate program_strength on in-domain signature genes plus
/// noise_rate everywhere. Deterministic for a fixed seed.
SyntheticData generate(const SyntheticSpec& spec);

/// Writes matrix.mtx, genes.txt, cells.txt, coords.csv, truth.csv and
/// markers.tsv into the directory.
void save_synthetic(const SyntheticData& data, const std::string& out_dir);

DomainLayout parse_layout(const std::string& name);

}  // namespace spatialnmf
