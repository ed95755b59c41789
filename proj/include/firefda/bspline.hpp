#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "firefda/common.hpp"

namespace firefda {

/// B-spline basis on a fixed knot vector. `knots` is the full vector
/// including boundary replication; n_basis = knots.size() - degree - 1.
template <typename Scalar = double>
struct SplineBasis {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Vector knots;
    int degree{3};
    Eigen::Index n_basis{0};

    SplineBasis() = default;

    SplineBasis(Vector knot_vector, int deg) : knots(std::move(knot_vector)), degree(deg) {
        if (degree < 0) throw validation_error("SplineBasis: degree must be nonnegative");
        if (knots.size() < degree + 2) throw validation_error("SplineBasis: too few knots");
        for (Eigen::Index i = 1; i < knots.size(); ++i)
            if (knots(i) < knots(i - 1))
                throw validation_error("SplineBasis: knots must be nondecreasing");
        n_basis = knots.size() - degree - 1;
        if (domain_min() >= domain_max())
            throw validation_error("SplineBasis: empty domain");
    }

    /// Equally spaced interior knots over [lo, hi] with (degree+1)-fold
    /// boundary replication; n_basis = interior_knots + degree + 1.
    static SplineBasis uniform(Scalar lo, Scalar hi, Eigen::Index n_basis, int degree = 3) {
        if (n_basis < degree + 1)
            throw validation_error("SplineBasis: n_basis must be at least degree + 1");
        if (!(hi > lo)) throw validation_error("SplineBasis: need hi > lo");
        const Eigen::Index interior = n_basis - degree - 1;
        Vector k(n_basis + degree + 1);
        for (int i = 0; i <= degree; ++i) k(i) = lo;
        for (Eigen::Index i = 0; i < interior; ++i)
            k(degree + 1 + i) = lo + (hi - lo) * Scalar(i + 1) / Scalar(interior + 1);
        for (int i = 0; i <= degree; ++i) k(n_basis + i) = hi;
        return SplineBasis(std::move(k), degree);
    }

    Scalar domain_min() const { return knots(degree); }
    Scalar domain_max() const { return knots(knots.size() - degree - 1); }

    /// The degree+1 basis values that are nonzero at x, plus the index of the
    /// first of them. Standard triangular recurrence.
    void evaluate_local(Scalar x, Eigen::Index& first, Vector& values) const {
        const Scalar lo = domain_min(), hi = domain_max();
        if (x < lo || x > hi)
            throw validation_error("SplineBasis: point " + std::to_string(double(x)) +
                                   " outside knot range [" + std::to_string(double(lo)) + ", " +
                                   std::to_string(double(hi)) + "]");
        // Knot span: largest i with knots[i] <= x < knots[i+1]; the right
        // boundary belongs to the last nonempty span.
        Eigen::Index span = degree;
        const Eigen::Index last_span = knots.size() - degree - 2;
        while (span < last_span && x >= knots(span + 1)) ++span;
        while (span > degree && knots(span) == knots(span + 1)) --span;

        values.resize(degree + 1);
        values(0) = Scalar(1);
        Vector left(degree + 1), right(degree + 1);
        for (int j = 1; j <= degree; ++j) {
            left(j) = x - knots(span + 1 - j);
            right(j) = knots(span + j) - x;
            Scalar saved = 0;
            for (int r = 0; r < j; ++r) {
                const Scalar denom = right(r + 1) + left(j - r);
                const Scalar tmp = denom != Scalar(0) ? values(r) / denom : Scalar(0);
                values(r) = saved + right(r + 1) * tmp;
                saved = left(j - r) * tmp;
            }
            values(j) = saved;
        }
        first = span - degree;
    }

    Vector evaluate(Scalar x) const {
        Vector row = Vector::Zero(n_basis);
        Eigen::Index first;
        Vector local;
        evaluate_local(x, first, local);
        for (int j = 0; j <= degree; ++j) {
            const Eigen::Index idx = first + j;
            if (idx >= 0 && idx < n_basis) row(idx) = local(j);
        }
        return row;
    }
};

/// Design matrix: row i holds the basis evaluated at points(i). Rows sum to
/// one inside the domain (partition of unity).
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> bspline_design(
    const Eigen::MatrixBase<Derived>& points, const SplineBasis<Scalar>& basis) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> design =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(points.size(), basis.n_basis);
    typename SplineBasis<Scalar>::Vector local;
    Eigen::Index first;
    for (Eigen::Index i = 0; i < points.size(); ++i) {
        basis.evaluate_local(points(i), first, local);
        for (int j = 0; j <= basis.degree; ++j) {
            const Eigen::Index idx = first + j;
            if (idx >= 0 && idx < basis.n_basis) design(i, idx) = local(j);
        }
    }
    return design;
}

/// Symmetric positive semidefinite difference penalty D'D with null space
/// dimension equal to `order`.
template <typename Scalar = double>
struct PenaltyMatrix {
    int order{2};
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix;
};

/// Forward-difference matrix of the given order: (n_basis - order) x n_basis.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> difference_matrix(Eigen::Index n_basis,
                                                                        int order) {
    if (order < 1) throw validation_error("difference_matrix: order must be at least 1");
    if (n_basis <= order)
        throw validation_error("difference_matrix: n_basis must exceed the order");
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(n_basis, n_basis);
    for (int k = 0; k < order; ++k) {
        const Eigen::Index rows = d.rows() - 1;
        d = (d.bottomRows(rows) - d.topRows(rows)).eval();
    }
    return d;
}

template <typename Scalar = double>
PenaltyMatrix<Scalar> difference_penalty(Eigen::Index n_basis, int order) {
    const auto d = difference_matrix<Scalar>(n_basis, order);
    return PenaltyMatrix<Scalar>{order, d.transpose() * d};
}

/// Row-wise Kronecker product: row i of the result is kron(a.row(i), b.row(i)).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> tensor_design(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& b) {
    if (a.rows() != b.rows())
        throw validation_error("tensor_design: row counts differ (" + std::to_string(a.rows()) +
                               " vs " + std::to_string(b.rows()) + ")");
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index ca = 0; ca < a.cols(); ++ca)
            out.row(i).segment(ca * b.cols(), b.cols()) = a(i, ca) * b.row(i);
    return out;
}

using SplineBasisD = SplineBasis<double>;
using PenaltyMatrixD = PenaltyMatrix<double>;

}  // namespace firefda
