#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>
#include <vector>

#include "firefda/common.hpp"

namespace firefda {

/// Regular sampling grid in event-relative years. `points_per_year` is the
/// length of one seasonal cycle in grid points (26 for 16-day satellite
/// composites); `step` is normally 1/points_per_year but may be set freely
/// for grids over other intervals.
template <typename Scalar = double>
struct TimeGrid {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    Scalar start{0};
    Scalar step{1};
    Eigen::Index n_points{0};
    int points_per_year{1};

    TimeGrid() = default;

    TimeGrid(Scalar start_, Scalar step_, Eigen::Index n, int ppy)
        : start(start_), step(step_), n_points(n), points_per_year(ppy) {
        if (!(step > Scalar(0))) throw validation_error("TimeGrid: step must be positive");
        if (n_points < 2) throw validation_error("TimeGrid: need at least 2 points");
        if (points_per_year < 1) throw validation_error("TimeGrid: points_per_year must be positive");
    }

    /// Grid starting at the event (t=0) with step 1/points_per_year.
    static TimeGrid event_grid(int years_post = 7, int ppy = 26) {
        return TimeGrid(Scalar(0), Scalar(1) / Scalar(ppy),
                        Eigen::Index(years_post) * Eigen::Index(ppy), ppy);
    }

    /// n equally spaced points covering [a, b]. points_per_year is
    /// informational here (defaults to 1).
    static TimeGrid over_interval(Scalar a, Scalar b, Eigen::Index n, int ppy = 1) {
        if (n < 2) throw validation_error("TimeGrid: need at least 2 points");
        return TimeGrid(a, (b - a) / Scalar(n - 1), n, ppy);
    }

    Scalar point(Eigen::Index j) const { return start + Scalar(j) * step; }
    Scalar end() const { return point(n_points - 1); }

    Vector points() const {
        return Vector::LinSpaced(n_points, start, end());
    }

    bool operator==(const TimeGrid& o) const {
        return start == o.start && step == o.step && n_points == o.n_points &&
               points_per_year == o.points_per_year;
    }
    bool operator!=(const TimeGrid& o) const { return !(*this == o); }
};

/// One function sampled on a TimeGrid.
template <typename Scalar = double>
struct Curve {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    TimeGrid<Scalar> grid;
    Vector values;

    Curve() = default;
    Curve(TimeGrid<Scalar> g, Vector v) : grid(std::move(g)), values(std::move(v)) {
        if (values.size() != grid.n_points)
            throw validation_error("Curve: values length does not match grid");
        if (!values.allFinite()) throw validation_error("Curve: non-finite values");
    }
};

/// n curves sharing one grid: row i of `curves` is the function of unit i.
template <typename Scalar = double>
struct FunctionalDataset {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    TimeGrid<Scalar> grid;
    std::vector<std::string> unit_ids;
    Matrix curves;

    FunctionalDataset() = default;
    FunctionalDataset(TimeGrid<Scalar> g, std::vector<std::string> ids, Matrix m)
        : grid(std::move(g)), unit_ids(std::move(ids)), curves(std::move(m)) {
        if (curves.rows() < 1) throw validation_error("FunctionalDataset: need at least one curve");
        if (curves.cols() != grid.n_points)
            throw validation_error("FunctionalDataset: column count does not match grid");
        if (Eigen::Index(unit_ids.size()) != curves.rows())
            throw validation_error("FunctionalDataset: unit_ids not aligned with rows");
        if (!curves.allFinite()) throw validation_error("FunctionalDataset: non-finite values");
        std::unordered_set<std::string> seen;
        for (const auto& id : unit_ids)
            if (!seen.insert(id).second)
                throw validation_error("FunctionalDataset: duplicate unit_id '" + id + "'");
    }

    Eigen::Index n_units() const { return curves.rows(); }

    Curve<Scalar> curve(Eigen::Index i) const {
        return Curve<Scalar>(grid, curves.row(i).transpose());
    }
};

/// Trapezoid quadrature weights for a regular grid: step * (1/2, 1, ..., 1, 1/2).
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> quadrature_weights(const TimeGrid<Scalar>& grid) {
    Eigen::Vector<Scalar, Eigen::Dynamic> w =
        Eigen::Vector<Scalar, Eigen::Dynamic>::Constant(grid.n_points, grid.step);
    w(0) *= Scalar(0.5);
    w(grid.n_points - 1) *= Scalar(0.5);
    return w;
}

/// Composite trapezoid rule over the grid; exact for piecewise-linear values.
template <typename Scalar, typename Derived>
Scalar integrate(const TimeGrid<Scalar>& grid, const Eigen::MatrixBase<Derived>& values) {
    if (values.size() != grid.n_points)
        throw validation_error("integrate: values length does not match grid");
    const auto n = grid.n_points;
    Scalar interior = values.segment(1, n - 2).sum();
    return grid.step * (Scalar(0.5) * (values(0) + values(n - 1)) + interior);
}

template <typename Scalar>
Scalar integrate(const Curve<Scalar>& c) {
    return integrate(c.grid, c.values);
}

/// L2 inner product <a,b> = integral of a*b, via the grid quadrature.
template <typename Scalar>
Scalar inner_product(const Curve<Scalar>& a, const Curve<Scalar>& b) {
    if (a.grid != b.grid)
        throw validation_error("inner_product: curves live on different grids");
    return integrate(a.grid, (a.values.array() * b.values.array()).matrix());
}

template <typename Scalar>
Scalar l2_norm(const Curve<Scalar>& c) {
    return std::sqrt(integrate(c.grid, c.values.array().square().matrix()));
}

/// Pointwise mean across units.
template <typename Scalar>
Curve<Scalar> mean_function(const FunctionalDataset<Scalar>& ds) {
    return Curve<Scalar>(ds.grid, ds.curves.colwise().mean().transpose());
}

/// Subtracts the mean function from every row; the result has pointwise
/// mean zero and centering is idempotent.
template <typename Scalar>
FunctionalDataset<Scalar> center(const FunctionalDataset<Scalar>& ds) {
    typename FunctionalDataset<Scalar>::Matrix c =
        ds.curves.rowwise() - ds.curves.colwise().mean();
    return FunctionalDataset<Scalar>(ds.grid, ds.unit_ids, std::move(c));
}

/// h-modal depth of every curve: MD(y_i) = sum_k K(d(y_i,y_k)/h) with a
/// Gaussian kernel and h the 15th percentile of the pairwise nonzero L2
/// distances. Larger is deeper. If all curves coincide the depths tie.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> modal_depth(const FunctionalDataset<Scalar>& ds) {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    const Eigen::Index n = ds.n_units();
    if (n < 2) throw validation_error("modal_depth: need at least 2 curves");

    const Vector w = quadrature_weights(ds.grid);
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dist(n, n);
    std::vector<Scalar> nonzero;
    nonzero.reserve(std::size_t(n) * std::size_t(n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        dist(i, i) = Scalar(0);
        for (Eigen::Index k = i + 1; k < n; ++k) {
            const Vector diff = (ds.curves.row(i) - ds.curves.row(k)).transpose();
            const Scalar d = std::sqrt(diff.array().square().matrix().dot(w));
            dist(i, k) = dist(k, i) = d;
            if (d > Scalar(0)) nonzero.push_back(d);
        }
    }

    const Scalar k0 = Scalar(1) / std::sqrt(Scalar(2) * Scalar(M_PI));
    if (nonzero.empty()) return Vector::Constant(n, Scalar(n) * k0);  // all identical: tie

    std::sort(nonzero.begin(), nonzero.end());
    const Scalar h = [&] {
        if (nonzero.size() == 1) return nonzero.front();
        const Scalar pos = Scalar(0.15) * Scalar(nonzero.size() - 1);
        const auto lo = std::size_t(std::floor(pos));
        const Scalar frac = pos - Scalar(lo);
        return nonzero[lo] + frac * (nonzero[lo + 1] - nonzero[lo]);
    }();

    Vector depth(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Scalar s = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const Scalar u = dist(i, k) / h;
            s += k0 * std::exp(Scalar(-0.5) * u * u);
        }
        depth(i) = s;
    }
    return depth;
}

/// Index of the deepest curve; ties go to the lowest unit index.
template <typename Scalar>
Eigen::Index deepest_index(const FunctionalDataset<Scalar>& ds) {
    const auto depth = modal_depth(ds);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < depth.size(); ++i)
        if (depth(i) > depth(best)) best = i;
    return best;
}

using TimeGridD = TimeGrid<double>;
using CurveD = Curve<double>;
using FunctionalDatasetD = FunctionalDataset<double>;

}  // namespace firefda
