#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "firefda/common.hpp"
#include "firefda/grid.hpp"

namespace firefda {

/// Eigen-decomposition of the sampling covariance operator, discretized with
/// the grid quadrature. Principal functions are orthonormal in the L2 inner
/// product; scores are the projections of the centered curves.
template <typename Scalar = double>
struct FpcaResult {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    TimeGrid<Scalar> grid;
    std::vector<std::string> unit_ids;
    Curve<Scalar> mean;
    Matrix principal_functions;  // n_points x q, column j = g_j on the grid
    Vector eigenvalues;          // q, nonincreasing
    Matrix scores;               // n x q
    Vector variance_share;       // lambda_j / total variance
    bool degenerate{false};      // all-zero variance input

    Eigen::Index n_components() const { return eigenvalues.size(); }

    Curve<Scalar> principal_function(Eigen::Index j) const {
        return Curve<Scalar>(grid, principal_functions.col(j));
    }
};

/// Pointwise sampling covariance c(s,t) = (1/n) sum_i (y_i(s)-m(s))(y_i(t)-m(t)).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> covariance_surface(
    const FunctionalDataset<Scalar>& ds) {
    if (ds.n_units() < 2)
        throw validation_error("covariance_surface: need at least 2 curves");
    typename FunctionalDataset<Scalar>::Matrix centered =
        ds.curves.rowwise() - ds.curves.colwise().mean();
    return (centered.transpose() * centered) / Scalar(ds.n_units());
}

/// FPCA via the quadrature-weighted symmetric eigenproblem: with W the
/// trapezoid weight matrix, eigenvectors v of W^1/2 C W^1/2 give principal
/// functions g = W^-1/2 v, already normalized to unit L2 norm. Signs are
/// fixed so that the integral of each g is nonnegative (first nonzero value
/// positive on a tie). A zero-variance dataset is flagged degenerate and
/// reported with zero eigenvalues rather than rejected.
template <typename Scalar>
FpcaResult<Scalar> fpca(const FunctionalDataset<Scalar>& ds, Eigen::Index q) {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    const Eigen::Index n = ds.n_units();
    const Eigen::Index m = ds.grid.n_points;
    if (n < 2) throw validation_error("fpca: need at least 2 curves");
    const Eigen::Index q_max = std::min<Eigen::Index>(n - 1, m);
    if (q < 1 || q > q_max)
        throw validation_error("fpca: q = " + std::to_string(q) + " out of range [1, " +
                               std::to_string(q_max) + "]");

    const Vector w = quadrature_weights(ds.grid);
    const Vector w_sqrt = w.array().sqrt().matrix();
    const Matrix centered = ds.curves.rowwise() - ds.curves.colwise().mean();
    const Matrix cov = (centered.transpose() * centered) / Scalar(n);
    const Matrix sym = w_sqrt.asDiagonal() * cov * w_sqrt.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success) throw numeric_error("fpca: eigen decomposition failed");

    const Scalar total = sym.trace();
    FpcaResult<Scalar> out;
    out.grid = ds.grid;
    out.unit_ids = ds.unit_ids;
    out.mean = mean_function(ds);
    out.principal_functions.resize(m, q);
    out.eigenvalues.resize(q);
    out.variance_share.resize(q);
    out.degenerate = total <= Scalar(1e-14) * Scalar(m);

    const Scalar tie_tol = Scalar(1e-9);
    for (Eigen::Index j = 0; j < q; ++j) {
        const Eigen::Index src = m - 1 - j;  // Eigen sorts ascending
        const Scalar lambda = std::max(es.eigenvalues()(src), Scalar(0));
        Vector g = (es.eigenvectors().col(src).array() / w_sqrt.array()).matrix();
        Scalar integral = g.dot(w);
        if (std::abs(integral) <= tie_tol) {
            for (Eigen::Index a = 0; a < m; ++a)
                if (std::abs(g(a)) > tie_tol) {
                    integral = g(a);
                    break;
                }
        }
        if (integral < Scalar(0)) g = -g;
        out.principal_functions.col(j) = g;
        out.eigenvalues(j) = lambda;
        out.variance_share(j) = out.degenerate ? Scalar(0) : lambda / total;
    }
    out.scores = centered * w.asDiagonal() * out.principal_functions;
    return out;
}

/// Rank-k reconstruction: mean + sum_{j<=k} score_ij g_j.
template <typename Scalar>
FunctionalDataset<Scalar> reconstruct(const FpcaResult<Scalar>& r, Eigen::Index k) {
    if (k < 1 || k > r.n_components())
        throw validation_error("reconstruct: k = " + std::to_string(k) + " out of range [1, " +
                               std::to_string(r.n_components()) + "]");
    typename FunctionalDataset<Scalar>::Matrix rows =
        (r.scores.leftCols(k) * r.principal_functions.leftCols(k).transpose()).rowwise() +
        r.mean.values.transpose();
    return FunctionalDataset<Scalar>(r.grid, r.unit_ids, std::move(rows));
}

using FpcaResultD = FpcaResult<double>;

}  // namespace firefda
