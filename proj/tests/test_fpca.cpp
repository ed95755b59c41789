#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "firefda/fpca.hpp"

using namespace firefda;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

FunctionalDatasetD random_dataset(Index n, Index m, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    auto grid = TimeGridD::over_interval(0.0, 7.0, m, 26);
    MatrixXd rows(n, m);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j) rows(i, j) = nd(rng);
    std::vector<std::string> ids;
    for (Index i = 0; i < n; ++i) ids.push_back("u" + std::to_string(i));
    return FunctionalDatasetD(grid, ids, rows);
}

// Independent weighted matrix-PCA oracle: eigenvalues of W^1/2 C W^1/2.
VectorXd oracle_eigenvalues(const FunctionalDatasetD& ds) {
    MatrixXd centered = ds.curves.rowwise() - ds.curves.colwise().mean();
    MatrixXd cov = centered.transpose() * centered / double(ds.n_units());
    VectorXd w = quadrature_weights(ds.grid);
    MatrixXd sym = w.cwiseSqrt().asDiagonal() * cov * w.cwiseSqrt().asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
    return es.eigenvalues().reverse();
}

}  // namespace

TEST_CASE("covariance surface: degenerate and hand-computed cases") {
    auto grid = TimeGridD::event_grid(1, 26);
    MatrixXd ident = MatrixXd::Constant(3, grid.n_points, 0.7);
    FunctionalDatasetD same(grid, {"a", "b", "c"}, ident);
    CHECK(covariance_surface(same).cwiseAbs().maxCoeff() <= 1e-14);

    MatrixXd two(2, grid.n_points);
    two.row(0).setZero();
    two.row(1).setConstant(2.0);
    FunctionalDatasetD d2(grid, {"a", "b"}, two);
    // Centered rows are -1 and +1, divisor n = 2: covariance is constant 1.
    CHECK((covariance_surface(d2).array() - 1.0).abs().maxCoeff() <= 1e-14);

    FunctionalDatasetD one(grid, {"a"}, ident.topRows(1));
    CHECK_THROWS_AS(covariance_surface(one), validation_error);
}

TEST_CASE("covariance surface matches the direct matrix oracle") {
    auto ds = random_dataset(20, 50, 123);
    MatrixXd centered = ds.curves.rowwise() - ds.curves.colwise().mean();
    MatrixXd oracle = centered.transpose() * centered / 20.0;
    CHECK((covariance_surface(ds) - oracle).cwiseAbs().maxCoeff() <= 1e-12);
    // Symmetric PSD.
    MatrixXd c = covariance_surface(ds);
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(c);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("rank-1 construction: closed form") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    auto grid = TimeGridD::over_interval(0.0, 7.0, 80, 26);
    const Index n = 30;
    VectorXd u(grid.n_points), base(grid.n_points);
    for (Index j = 0; j < grid.n_points; ++j) {
        u(j) = std::sin(0.8 * grid.point(j)) + 0.3;
        base(j) = 0.1 * grid.point(j);
    }
    VectorXd c(n);
    for (Index i = 0; i < n; ++i) c(i) = nd(rng);

    MatrixXd rows(n, grid.n_points);
    for (Index i = 0; i < n; ++i) rows.row(i) = base.transpose() + c(i) * u.transpose();
    std::vector<std::string> ids;
    for (Index i = 0; i < n; ++i) ids.push_back("u" + std::to_string(i));
    FunctionalDatasetD ds(grid, ids, rows);

    auto r = fpca(ds, 3);
    const double u_norm = l2_norm(CurveD(grid, u));
    const double c_var = (c.array() - c.mean()).square().sum() / double(n);
    CHECK(r.eigenvalues(0) == doctest::Approx(c_var * u_norm * u_norm).epsilon(1e-10));
    CHECK(r.variance_share(0) == doctest::Approx(1.0).epsilon(1e-10));
    // First principal function is +-u/||u||.
    VectorXd gu = u / u_norm;
    const double align = std::min((r.principal_functions.col(0) - gu).norm(),
                                  (r.principal_functions.col(0) + gu).norm());
    CHECK(align <= 1e-8);

    // Rank-1 reconstruction is exact.
    auto rec = reconstruct(r, 1);
    CHECK((rec.curves - ds.curves).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("identical curves: degenerate flag, zero eigenvalues, k=1 gives mean") {
    auto grid = TimeGridD::event_grid(1, 26);
    MatrixXd rows = MatrixXd::Constant(5, grid.n_points, -0.3);
    FunctionalDatasetD ds(grid, {"a", "b", "c", "d", "e"}, rows);
    auto r = fpca(ds, 2);
    CHECK(r.degenerate);
    CHECK(r.eigenvalues.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(r.variance_share.cwiseAbs().maxCoeff() == 0.0);
    auto rec = reconstruct(r, 1);
    CHECK((rec.curves.array() + 0.3).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("oracle equivalence, orthonormality, score identities on random data") {
    std::mt19937_64 seeds(2024);
    for (int rep = 0; rep < 8; ++rep) {
        const Index n = 10 + Index(seeds() % 40);
        const Index m = 20 + Index(seeds() % 80);
        auto ds = random_dataset(n, m, unsigned(seeds()));
        const Index q = std::min<Index>(5, n - 1);
        auto r = fpca(ds, q);

        const VectorXd oracle = oracle_eigenvalues(ds);
        for (Index j = 0; j < q; ++j)
            CHECK(std::abs(r.eigenvalues(j) - oracle(j)) <=
                  1e-8 * std::max(1.0, std::abs(oracle(j))));

        // Orthonormality in the quadrature inner product.
        for (Index a = 0; a < q; ++a)
            for (Index b = a; b < q; ++b) {
                const double ip =
                    inner_product(r.principal_function(a), r.principal_function(b));
                CHECK(std::abs(ip - (a == b ? 1.0 : 0.0)) <= 1e-8);
            }

        // Column means of scores vanish; score variance equals eigenvalue.
        CHECK(r.scores.colwise().mean().cwiseAbs().maxCoeff() <= 1e-8);
        for (Index j = 0; j < q; ++j) {
            const double v = r.scores.col(j).squaredNorm() / double(n);
            CHECK(std::abs(v - r.eigenvalues(j)) <= 1e-8 * std::max(1.0, r.eigenvalues(j)));
        }

        // Eigenvalues are nonincreasing and shares sum to at most 1.
        for (Index j = 1; j < q; ++j) CHECK(r.eigenvalues(j) <= r.eigenvalues(j - 1) + 1e-12);
        CHECK(r.variance_share.sum() <= 1.0 + 1e-12);

        // Sign convention: integral of each principal function nonnegative
        // (or first nonzero value positive when the integral ties at zero).
        for (Index j = 0; j < q; ++j) {
            const double integral = integrate(r.principal_function(j));
            if (std::abs(integral) > 1e-9) {
                CHECK(integral >= 0.0);
            }
        }
    }
}

TEST_CASE("translation invariance") {
    auto ds = random_dataset(15, 40, 5150);
    auto r0 = fpca(ds, 4);
    VectorXd shift(ds.grid.n_points);
    for (Index j = 0; j < ds.grid.n_points; ++j) shift(j) = 2.0 + std::cos(0.2 * double(j));
    FunctionalDatasetD moved(ds.grid, ds.unit_ids,
                             MatrixXd(ds.curves.rowwise() + shift.transpose()));
    auto r1 = fpca(moved, 4);
    CHECK((r0.principal_functions - r1.principal_functions).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((r0.eigenvalues - r1.eigenvalues).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((r0.scores - r1.scores).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("reconstruction error is nonincreasing in k and exact at full rank") {
    auto ds = random_dataset(12, 30, 777);
    const Index q = 11;
    auto r = fpca(ds, q);
    double prev = std::numeric_limits<double>::infinity();
    for (Index k = 1; k <= q; ++k) {
        auto rec = reconstruct(r, k);
        double err = 0.0;
        for (Index i = 0; i < ds.n_units(); ++i) {
            VectorXd diff = (ds.curves.row(i) - rec.curves.row(i)).transpose();
            err += integrate(ds.grid, diff.array().square().matrix());
        }
        CHECK(err <= prev + 1e-12);
        prev = err;
    }
    auto full = reconstruct(r, q);
    const double rel = (full.curves - ds.curves).norm() / ds.curves.norm();
    CHECK(rel <= 1e-8);
}

TEST_CASE("argument validation") {
    auto ds = random_dataset(10, 30, 1);
    CHECK_THROWS_AS(fpca(ds, 0), validation_error);
    CHECK_THROWS_AS(fpca(ds, 10), validation_error);  // q_max = n-1 = 9
    auto r = fpca(ds, 3);
    CHECK_THROWS_AS(reconstruct(r, 4), validation_error);
    CHECK_THROWS_AS(reconstruct(r, 0), validation_error);
}
