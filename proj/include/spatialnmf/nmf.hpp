#pragma once

#include "spatialnmf/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace spatialnmf {

/// Nonnegative factor pair W (cells x k) and H (k x genes) with fit
/// diagnostics. loss_trace[0] is the loss at initialization, followed by one
/// entry per multiplicative-update iteration; the sequence is non-increasing.
struct FactorModel {
    Matrix W;
    Matrix H;
    Index k = 0;
    std::vector<double> loss_trace;
    Index n_iter = 0;
    std::uint64_t seed = 0;
};

/// NNDSVD initialization, "a" variant: factors are built from the rank-k
/// truncated SVD by keeping the dominant nonnegative part of each singular
/// pair scaled by sqrt(sigma), and every zero entry is then replaced by the
/// mean of X. The computation is deterministic; the seed is recorded on the
/// resulting fit only.
std::pair<Matrix, Matrix> nndsvda_init(const SparseMatrix& x, Index k,
                                       std::uint64_t seed = 0);

/// Frobenius-objective NMF via Lee-Seung multiplicative updates starting
/// from NNDSVDa. Stops after max_iter iterations or when the relative loss
/// decrease over a 10-iteration window falls below tol (tol <= 0 disables
/// the early stop). Denominators are guarded by a 1e-12 epsilon. Columns of
/// W that collapse to zero are reseeded from the dominant column of the
/// positive residual, which never increases the loss.
FactorModel nmf_fit(const SparseMatrix& x, Index k, Index max_iter = 500,
                    double tol = 1e-4, std::uint64_t seed = 0);

/// sum_ij (X - WH)_ij^2, evaluated with compensated summation.
double frobenius_loss(const SparseMatrix& x, const Matrix& w,
                      const Matrix& h);

}  // namespace spatialnmf
