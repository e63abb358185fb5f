#pragma once

#include "spatialnmf/types.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace spatialnmf {

/// Keeps genes with nonzero entries in at least min_cells cells; gene order
/// preserved. Requires raw (not log-normalized) input.
Dataset filter_genes(const Dataset& ds, Index min_cells = 3);

/// Keeps cells with at least min_genes genes detected; cell_ids and coords
/// are filtered in lockstep.
Dataset filter_cells(const Dataset& ds, Index min_genes = 200);

/// Scales every cell to target_sum total counts, then maps x -> ln(x + 1).
/// Sparsity pattern is preserved exactly. Cells with zero total are an
/// error; filter them out first.
Dataset normalize_and_log(const Dataset& ds, double target_sum = 10000.0);

/// Drops cells whose score exceeds the threshold. Cells without a score are
/// kept. Scores come from an external tool; none is computed here.
Dataset drop_high_score_cells(
    const Dataset& ds, const std::unordered_map<std::string, double>& scores,
    double threshold = 0.2);

/// Removes the named genes (for excluding control probes downstream).
/// Unknown names are ignored.
Dataset exclude_genes(const Dataset& ds,
                      const std::vector<std::string>& names);

}  // namespace spatialnmf
