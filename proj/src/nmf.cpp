#include "spatialnmf/nmf.hpp"

#include <Eigen/Eigenvalues>

#include <cassert>
#include <cmath>
#include <limits>

namespace spatialnmf {

namespace {

constexpr double kDenomEps = 1e-12;
constexpr double kNndsvdEps = 1e-6;

struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        const double y = v - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

void check_nonnegative_finite(const SparseMatrix& x, const char* op) {
    for (Index i = 0; i < x.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(x, i); it; ++it) {
            if (std::isnan(it.value())) {
                throw std::invalid_argument(std::string(op) +
                                            ": input contains NaN");
            }
            if (it.value() < 0.0) {
                throw std::invalid_argument(std::string(op) +
                                            ": input has a negative entry");
            }
        }
    }
}

/// Rank-k truncated SVD of a sparse matrix via the Gram matrix of the
/// smaller side. Returns U (n x k), singular values (descending), V (p x k).
/// Rank-deficient trailing components get sigma = 0 and zero vectors.
void truncated_svd(const SparseMatrix& x, Index k, Matrix& u, Vector& sigma,
                   Matrix& v) {
    const Index n = x.rows(), p = x.cols();
    const bool gram_cols = p <= n;
    Matrix gram;
    if (gram_cols) {
        // X^T X accumulated row by row; only the upper triangle is filled.
        gram = Matrix::Zero(p, p);
        for (Index i = 0; i < x.outerSize(); ++i) {
            for (SparseMatrix::InnerIterator a(x, i); a; ++a) {
                for (SparseMatrix::InnerIterator b = a; b; ++b) {
                    gram(a.col(), b.col()) += a.value() * b.value();
                }
            }
        }
        gram = gram.selfadjointView<Eigen::Upper>();
    } else {
        gram = Matrix(x * SparseMatrix(x.transpose()));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("truncated_svd: eigendecomposition failed");
    }
    const Index m = gram.rows();
    u.setZero(n, k);
    v.setZero(p, k);
    sigma.setZero(k);
    for (Index j = 0; j < k; ++j) {
        const Index src = m - 1 - j;  // eigenvalues come in ascending order
        const double lambda = std::max(0.0, eig.eigenvalues()[src]);
        const double s = std::sqrt(lambda);
        sigma[j] = s;
        if (s <= 0.0) continue;
        if (gram_cols) {
            v.col(j) = eig.eigenvectors().col(src);
            u.col(j) = (x * v.col(j)) / s;
        } else {
            u.col(j) = eig.eigenvectors().col(src);
            v.col(j) = (SparseMatrix(x.transpose()) * u.col(j)) / s;
        }
        // Deterministic sign: largest-magnitude entry of u is positive.
        Index arg = 0;
        u.col(j).cwiseAbs().maxCoeff(&arg);
        if (u(arg, j) < 0.0) {
            u.col(j) = -u.col(j);
            v.col(j) = -v.col(j);
        }
    }
}

double sparse_mean(const SparseMatrix& x) {
    KahanSum s;
    for (Index i = 0; i < x.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(x, i); it; ++it) s.add(it.value());
    }
    return s.sum / (static_cast<double>(x.rows()) * static_cast<double>(x.cols()));
}

double sparse_sq_norm(const SparseMatrix& x) {
    KahanSum s;
    for (Index i = 0; i < x.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(x, i); it; ++it) {
            s.add(it.value() * it.value());
        }
    }
    return s.sum;
}

/// W^T X accumulated over the nonzeros of X.
Matrix dense_t_times_sparse(const Matrix& w, const SparseMatrix& x) {
    const Index k = w.cols(), p = x.cols();
    Matrix out = Matrix::Zero(k, p);
    for (Index i = 0; i < x.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(x, i); it; ++it) {
            out.col(it.col()) += it.value() * w.row(i).transpose();
        }
    }
    return out;
}

/// Reseeds dead (all-zero) columns of W from the dominant column of the
/// positive residual max(X - WH, 0): W[:, c] = relu(r_j*), H[c, :] = e_j*.
/// This replaces a component contributing nothing and strictly lowers the
/// loss by ||relu(r_j*)||^2, so the trace stays monotone.
void reseed_dead_columns(const SparseMatrix& x, Matrix& w, Matrix& h) {
    const Index k = w.cols();
    std::vector<Index> dead;
    for (Index c = 0; c < k; ++c) {
        if (w.col(c).maxCoeff() < kDenomEps) dead.push_back(c);
    }
    if (dead.empty()) return;
    Matrix residual = Matrix(x) - w * h;
    for (Index c : dead) {
        Index best_col = -1;
        double best_norm = 0.0;
        for (Index j = 0; j < residual.cols(); ++j) {
            const double norm2 = residual.col(j).cwiseMax(0.0).squaredNorm();
            if (norm2 > best_norm) {
                best_norm = norm2;
                best_col = j;
            }
        }
        if (best_col < 0) return;  // X <= WH everywhere; nothing to gain
        w.col(c) = residual.col(best_col).cwiseMax(0.0);
        h.row(c).setZero();
        h(c, best_col) = 1.0;
        residual.col(best_col) -= w.col(c);
    }
}

}  // namespace

std::pair<Matrix, Matrix> nndsvda_init(const SparseMatrix& x, Index k,
                                       std::uint64_t /*seed*/) {
    const Index n = x.rows(), p = x.cols();
    if (k < 1 || k > std::min(n, p)) {
        throw std::invalid_argument("nndsvda_init: need 1 <= k <= min(n, p), got k=" +
                                    std::to_string(k));
    }
    check_nonnegative_finite(x, "nndsvda_init");

    Matrix u, v;
    Vector sigma;
    truncated_svd(x, k, u, sigma, v);

    Matrix w = Matrix::Zero(n, k);
    Matrix h = Matrix::Zero(k, p);
    if (sigma[0] > 0.0) {
        const double s0 = std::sqrt(sigma[0]);
        w.col(0) = s0 * u.col(0).cwiseAbs();
        h.row(0) = s0 * v.col(0).cwiseAbs().transpose();
    }
    for (Index j = 1; j < k; ++j) {
        if (sigma[j] <= 0.0) continue;
        const Vector x_p = u.col(j).cwiseMax(0.0);
        const Vector x_n = (-u.col(j)).cwiseMax(0.0);
        const Vector y_p = v.col(j).cwiseMax(0.0);
        const Vector y_n = (-v.col(j)).cwiseMax(0.0);
        const double xp_norm = x_p.norm(), xn_norm = x_n.norm();
        const double yp_norm = y_p.norm(), yn_norm = y_n.norm();
        const double m_p = xp_norm * yp_norm;
        const double m_n = xn_norm * yn_norm;
        if (m_p <= 0.0 && m_n <= 0.0) continue;
        const double lbd = std::sqrt(sigma[j] * std::max(m_p, m_n));
        if (m_p >= m_n) {
            w.col(j) = (lbd / xp_norm) * x_p;
            h.row(j) = (lbd / yp_norm) * y_p.transpose();
        } else {
            w.col(j) = (lbd / xn_norm) * x_n;
            h.row(j) = (lbd / yn_norm) * y_n.transpose();
        }
    }

    // "a" variant: near-zero entries become the matrix mean.
    const double avg = sparse_mean(x);
    w = (w.array() < kNndsvdEps).select(avg, w);
    h = (h.array() < kNndsvdEps).select(avg, h);
    return {std::move(w), std::move(h)};
}

double frobenius_loss(const SparseMatrix& x, const Matrix& w,
                      const Matrix& h) {
    if (w.rows() != x.rows() || h.cols() != x.cols() ||
        w.cols() != h.rows()) {
        throw std::invalid_argument(
            "frobenius_loss: shapes not conformable (X " +
            std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
            ", W " + std::to_string(w.rows()) + "x" +
            std::to_string(w.cols()) + ", H " + std::to_string(h.rows()) +
            "x" + std::to_string(h.cols()) + ")");
    }
    KahanSum total;
    Vector row(x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        row.noalias() = -(h.transpose() * w.row(i).transpose());
        for (SparseMatrix::InnerIterator it(x, i); it; ++it) {
            row[it.col()] += it.value();
        }
        for (Index j = 0; j < row.size(); ++j) total.add(row[j] * row[j]);
    }
    return total.sum;
}

FactorModel nmf_fit(const SparseMatrix& x, Index k, Index max_iter,
                    double tol, std::uint64_t seed) {
    const Index n = x.rows(), p = x.cols();
    if (k < 1 || k > std::min(n, p)) {
        throw std::invalid_argument("nmf_fit: need 1 <= k <= min(n, p), got k=" +
                                    std::to_string(k));
    }
    check_nonnegative_finite(x, "nmf_fit");

    FactorModel model;
    model.k = k;
    model.seed = seed;
    std::tie(model.W, model.H) = nndsvda_init(x, k, seed);

    // The exact residual scan is preferred while affordable; larger problems
    // use ||X||^2 - 2<XH^T, W> + <W^T W, HH^T>, whose pieces the updates
    // already produce.
    const bool exact_loss = n * p <= 2'000'000;
    const double x_sq_norm = exact_loss ? 0.0 : sparse_sq_norm(x);

    Matrix& w = model.W;
    Matrix& h = model.H;
    model.loss_trace.push_back(frobenius_loss(x, w, h));

    Matrix wt_x, wt_w, x_ht, h_ht;
    for (Index iter = 1; iter <= max_iter; ++iter) {
        // H <- H .* (W^T X) ./ (W^T W H + eps)
        wt_x = dense_t_times_sparse(w, x);
        wt_w.noalias() = w.transpose() * w;
        h.array() *= wt_x.array() / ((wt_w * h).array() + kDenomEps);

        // W <- W .* (X H^T) ./ (W (H H^T) + eps)
        x_ht = x * h.transpose();
        h_ht.noalias() = h * h.transpose();
        w.array() *= x_ht.array() / ((w * h_ht).array() + kDenomEps);

        assert(w.minCoeff() >= 0.0 && h.minCoeff() >= 0.0);

        reseed_dead_columns(x, w, h);

        double loss;
        if (exact_loss) {
            loss = frobenius_loss(x, w, h);
        } else {
            wt_w.noalias() = w.transpose() * w;
            loss = x_sq_norm - 2.0 * (x_ht.array() * w.array()).sum() +
                   (wt_w.array() * h_ht.array()).sum();
        }
        model.loss_trace.push_back(loss);
        model.n_iter = iter;

        if (tol > 0.0 && iter >= 10 && iter % 10 == 0) {
            const double start = model.loss_trace[static_cast<std::size_t>(iter - 10)];
            const double rel = (start - loss) /
                               std::max(start, std::numeric_limits<double>::min());
            if (rel < tol) break;
        }
    }
    return model;
}

}  // namespace spatialnmf
