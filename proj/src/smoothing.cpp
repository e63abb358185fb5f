#include "spatialnmf/smoothing.hpp"

#include "spatialnmf/log.hpp"

#include <cassert>

namespace spatialnmf {

SmoothedFactors snmf_smooth(const Matrix& w, const SpatialGraph& neighbors) {
    const SparseMatrix& a = neighbors.adjacency;
    if (a.rows() != w.rows()) {
        throw std::invalid_argument(
            "snmf_smooth: neighbor graph covers " + std::to_string(a.rows()) +
            " cells, factors cover " + std::to_string(w.rows()));
    }
    SmoothedFactors out;
    out.method = SmoothingMethod::snmf_average;
    out.W_s.resize(w.rows(), w.cols());
    Index isolated = 0;
    for (Index i = 0; i < w.rows(); ++i) {
        Index count = 0;
        Vector mean = Vector::Zero(w.cols());
        for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
            if (it.col() == i) continue;
            mean += w.row(it.col()).transpose();
            ++count;
        }
        if (count == 0) {
            out.W_s.row(i) = w.row(i);
            ++isolated;
        } else {
            out.W_s.row(i) = mean.transpose() / static_cast<double>(count);
        }
    }
    if (isolated > 0) {
        log::warn("snmf_smooth: " + std::to_string(isolated) +
                  " isolated cell(s) left unsmoothed");
    }
    return out;
}

SmoothedFactors diffuse(const Matrix& w, const DiffusionOperator& p,
                        double beta, Index steps) {
    if (p.P.rows() != w.rows()) {
        throw std::invalid_argument(
            "diffuse: operator is " + std::to_string(p.P.rows()) + "x" +
            std::to_string(p.P.cols()) + ", factors have " +
            std::to_string(w.rows()) + " rows");
    }
    if (beta < 0.0 || beta > 1.0) {
        throw std::invalid_argument("diffuse: beta must be in [0, 1]");
    }
    if (steps < 0) {
        throw std::invalid_argument("diffuse: steps must be nonnegative");
    }
    SmoothedFactors out;
    out.method = SmoothingMethod::hsnmf_diffuse;
    out.beta = beta;
    out.steps = steps;
    out.W_s = w;
    Matrix propagated;
    for (Index t = 0; t < steps; ++t) {
        propagated.noalias() = p.P * out.W_s;
        out.W_s = (1.0 - beta) * out.W_s + beta * propagated;
    }
    // Row-stochastic P maps nonnegative rows to convex combinations, so any
    // negative here is pure roundoff.
    assert(w.size() == 0 || w.minCoeff() < 0.0 ||
           out.W_s.minCoeff() > -1e-12);
    out.W_s = out.W_s.cwiseMax(0.0);
    return out;
}

}  // namespace spatialnmf
