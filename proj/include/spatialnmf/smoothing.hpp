#pragma once

#include "spatialnmf/graphs.hpp"
#include "spatialnmf/types.hpp"

namespace spatialnmf {

enum class SmoothingMethod { snmf_average, hsnmf_diffuse };

/// Spatially smoothed factor loadings, same shape as the input W.
struct SmoothedFactors {
    Matrix W_s;
    SmoothingMethod method = SmoothingMethod::hsnmf_diffuse;
    double beta = 0.0;
    Index steps = 0;
};

/// Single-step neighbor averaging: each cell's row becomes the unweighted
/// mean of its neighbors' rows, the cell itself excluded. Cells without
/// out-neighbors keep their row (a warning is logged).
SmoothedFactors snmf_smooth(const Matrix& w, const SpatialGraph& neighbors);

/// Iterative diffusion W <- (1 - beta) W + beta P W, applied `steps` times;
/// small numerical negatives are clipped to zero after the final step.
SmoothedFactors diffuse(const Matrix& w, const DiffusionOperator& p,
                        double beta = 0.8, Index steps = 2);

}  // namespace spatialnmf
