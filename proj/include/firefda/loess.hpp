#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "firefda/common.hpp"

namespace firefda {

namespace detail {

template <typename Scalar>
Scalar tricube(Scalar u) {
    const Scalar a = std::abs(u);
    if (a >= Scalar(1)) return Scalar(0);
    const Scalar t = Scalar(1) - a * a * a;
    return t * t * t;
}

template <typename Scalar>
Scalar bisquare(Scalar u) {
    const Scalar a = std::abs(u);
    if (a >= Scalar(1)) return Scalar(0);
    const Scalar t = Scalar(1) - a * a;
    return t * t;
}

template <typename Scalar>
Scalar median_abs(const Eigen::Vector<Scalar, Eigen::Dynamic>& v,
                  const std::vector<char>& mask) {
    std::vector<Scalar> a;
    a.reserve(std::size_t(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (mask.empty() || !mask[std::size_t(i)]) a.push_back(std::abs(v(i)));
    if (a.empty()) return Scalar(0);
    const auto mid = a.size() / 2;
    std::nth_element(a.begin(), a.begin() + mid, a.end());
    Scalar m = a[mid];
    if (a.size() % 2 == 0) {
        std::nth_element(a.begin(), a.begin() + mid - 1, a.begin() + mid);
        m = (m + a[mid - 1]) / Scalar(2);
    }
    return m;
}

/// Weighted local polynomial fit evaluated at arbitrary targets. `prior`
/// may be empty (all ones); zero-weight points are skipped, which is how
/// missing observations and robustness downweighting enter. If a window's
/// weighted system is degenerate the polynomial degree degrades locally.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> loess_fit(
    const Eigen::Vector<Scalar, Eigen::Dynamic>& x,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& y,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& prior,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& targets, Eigen::Index window, int degree) {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Eigen::Index n = x.size();
    window = std::min(window, n);

    Vector out(targets.size());
    for (Eigen::Index ti = 0; ti < targets.size(); ++ti) {
        const Scalar t = targets(ti);
        // Contiguous window of the `window` nearest abscissae.
        Eigen::Index lo = std::upper_bound(x.data(), x.data() + n, t) - x.data();
        lo = std::clamp<Eigen::Index>(lo - window / 2, 0, n - window);
        while (lo > 0 && t - x(lo - 1) < x(lo + window - 1) - t) --lo;
        while (lo + window < n && x(lo + window) - t < t - x(lo)) ++lo;

        Scalar h = std::max(t - x(lo), x(lo + window - 1) - t);
        if (h <= Scalar(0)) h = Scalar(1);

        int deg = degree;
        while (true) {
            Matrix a = Matrix::Zero(deg + 1, deg + 1);
            Vector b = Vector::Zero(deg + 1);
            Scalar wsum = 0;
            for (Eigen::Index j = lo; j < lo + window; ++j) {
                Scalar w = tricube((x(j) - t) / h);
                if (prior.size() > 0) w *= prior(j);
                if (w <= Scalar(0)) continue;
                wsum += w;
                const Scalar dx = x(j) - t;
                Scalar phi_r = 1;  // dx^r
                for (int r = 0; r <= deg; ++r) {
                    Scalar phi_rc = phi_r * phi_r;  // dx^(r+c), starting at c = r
                    for (int c = r; c <= deg; ++c) {
                        a(r, c) += w * phi_rc;
                        phi_rc *= dx;
                    }
                    b(r) += w * phi_r * y(j);
                    phi_r *= dx;
                }
            }
            if (wsum <= Scalar(0)) {
                // Every window point is masked out; interpolate with distance
                // weights only.
                if (prior.size() > 0 && deg == degree) {
                    Scalar s = 0, sw = 0;
                    for (Eigen::Index j = lo; j < lo + window; ++j) {
                        const Scalar w = tricube((x(j) - t) / (h * Scalar(2)));
                        s += w * y(j);
                        sw += w;
                    }
                    out(ti) = sw > Scalar(0) ? s / sw : y(lo);
                    break;
                }
                out(ti) = y(lo);
                break;
            }
            const Matrix full = a.template selfadjointView<Eigen::Upper>();
            a = full;
            Eigen::LDLT<Matrix> ldlt(a);
            const Vector beta = ldlt.solve(b);
            const Scalar rel = (a * beta - b).norm() / std::max(b.norm(), Scalar(1e-300));
            if (ldlt.info() == Eigen::Success && rel < Scalar(1e-8)) {
                out(ti) = beta(0);
                break;
            }
            if (deg == 0) {
                out(ti) = b(0) / wsum;
                break;
            }
            --deg;  // degenerate window: drop to a lower local degree
        }
    }
    return out;
}

}  // namespace detail

/// LOESS smoothing at the data abscissae: local polynomial fits over the
/// ceil(span*n) nearest neighbours with tricube weights, optionally
/// reweighted by bisquare robustness iterations.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> loess_smooth(
    const Eigen::Vector<Scalar, Eigen::Dynamic>& x,
    const Eigen::Vector<Scalar, Eigen::Dynamic>& y, Scalar span, int degree,
    int robust_iters = 0) {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    const Eigen::Index n = x.size();
    if (y.size() != n) throw validation_error("loess_smooth: x and y lengths differ");
    if (n < 2) throw validation_error("loess_smooth: need at least 2 points");
    if (!x.allFinite() || !y.allFinite())
        throw validation_error("loess_smooth: non-finite inputs");
    for (Eigen::Index i = 1; i < n; ++i)
        if (!(x(i) > x(i - 1)))
            throw validation_error("loess_smooth: x must be strictly increasing");
    if (!(span > Scalar(0)) || span > Scalar(1))
        throw validation_error("loess_smooth: span must lie in (0, 1]");
    if (degree < 0 || degree > 2)
        throw validation_error("loess_smooth: degree must be 0, 1 or 2");
    if (robust_iters < 0) throw validation_error("loess_smooth: robust_iters must be >= 0");

    const Eigen::Index window = Eigen::Index(std::ceil(double(span) * double(n)));
    if (window < degree + 1)
        throw validation_error("loess_smooth: insufficient points in window (span*n = " +
                               std::to_string(window) + ", need >= " +
                               std::to_string(degree + 1) + ")");

    Vector prior;  // empty = unweighted
    Vector fit = detail::loess_fit(x, y, prior, x, window, degree);
    for (int it = 0; it < robust_iters; ++it) {
        const Vector resid = y - fit;
        const Scalar s = detail::median_abs(resid, {});
        if (s <= Scalar(0)) break;
        prior.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            prior(i) = detail::bisquare(resid(i) / (Scalar(6) * s));
        fit = detail::loess_fit(x, y, prior, x, window, degree);
    }
    return fit;
}

}  // namespace firefda
