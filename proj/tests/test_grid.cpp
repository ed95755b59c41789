#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "firefda/grid.hpp"

using namespace firefda;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Composite Simpson rule on a callable, independent of the library quadrature.
double simpson(double a, double b, int intervals, double (*f)(double)) {
    if (intervals % 2 != 0) ++intervals;
    const double h = (b - a) / intervals;
    double s = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

CurveD constant_curve(const TimeGridD& g, double v) {
    return CurveD(g, VectorXd::Constant(g.n_points, v));
}

}  // namespace

TEST_CASE("integrate: constant on [0,7]") {
    // 183 points at step 1/26 end exactly at t=7.
    auto g = TimeGridD(0.0, 1.0 / 26.0, 183, 26);
    CHECK(g.end() == doctest::Approx(7.0).epsilon(1e-14));
    CHECK(integrate(constant_curve(g, 1.0)) == doctest::Approx(7.0).epsilon(1e-13));
}

TEST_CASE("integrate: linear integrand is exact") {
    auto g = TimeGridD::over_interval(0.0, 1.0, 27, 26);
    CurveD c(g, g.points());
    CHECK(integrate(c) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("integrate: sin on [0,pi] vs closed form and Simpson oracle") {
    auto g = TimeGridD::over_interval(0.0, M_PI, 182);
    CurveD c(g, g.points().array().sin().matrix());
    const double got = integrate(c);
    CHECK(std::abs(got - 2.0) < 1e-3);
    const double oracle = simpson(0.0, M_PI, 10000, std::sin);
    CHECK(std::abs(got - oracle) < 1e-3);
}

TEST_CASE("integrate is linear") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    auto g = TimeGridD::event_grid(7, 26);
    VectorXd av(g.n_points), bv(g.n_points);
    for (Index j = 0; j < g.n_points; ++j) { av(j) = nd(rng); bv(j) = nd(rng); }
    CurveD a(g, av), b(g, bv);
    const double alpha = 1.7, beta = -0.3;
    CurveD combo(g, alpha * av + beta * bv);
    const double lhs = integrate(combo);
    const double rhs = alpha * integrate(a) + beta * integrate(b);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("inner_product: unit-norm constant and zero factor") {
    auto g = TimeGridD(0.0, 1.0 / 26.0, 183, 26);
    CurveD u = constant_curve(g, 1.0 / std::sqrt(7.0));
    CHECK(inner_product(u, u) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(inner_product(constant_curve(g, 1.0), constant_curve(g, 0.0)) == 0.0);
}

TEST_CASE("inner_product: sin/cos orthogonality vs fine-grid oracle") {
    auto g = TimeGridD::over_interval(0.0, 7.0, 182, 26);
    const VectorXd t = g.points();
    CurveD a(g, (2.0 * M_PI * t.array() / 7.0).sin().matrix());
    CurveD b(g, (2.0 * M_PI * t.array() / 7.0).cos().matrix());
    CHECK(std::abs(inner_product(a, b)) < 1e-3);

    // Fine-grid quadrature oracle for the same product.
    auto gf = TimeGridD::over_interval(0.0, 7.0, 20001);
    const VectorXd tf = gf.points();
    CurveD prod(gf, ((2.0 * M_PI * tf.array() / 7.0).sin() *
                     (2.0 * M_PI * tf.array() / 7.0).cos()).matrix());
    CHECK(std::abs(integrate(prod)) < 1e-6);
}

TEST_CASE("inner_product rejects mismatched grids") {
    auto g1 = TimeGridD::event_grid(7, 26);
    auto g2 = TimeGridD::event_grid(6, 26);
    CHECK_THROWS_AS(inner_product(constant_curve(g1, 1.0), constant_curve(g2, 1.0)),
                    validation_error);
}

TEST_CASE("inner_product is symmetric and positive on nonzero curves") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    auto g = TimeGridD::event_grid(7, 26);
    VectorXd av(g.n_points), bv(g.n_points);
    for (Index j = 0; j < g.n_points; ++j) { av(j) = nd(rng); bv(j) = nd(rng); }
    CurveD a(g, av), b(g, bv);
    CHECK(inner_product(a, b) == doctest::Approx(inner_product(b, a)).epsilon(1e-14));
    CHECK(inner_product(a, a) > 0.0);
}

TEST_CASE("mean_function: constants and identity") {
    auto g = TimeGridD::event_grid(1, 26);
    MatrixXd rows(2, g.n_points);
    rows.row(0).setZero();
    rows.row(1).setConstant(2.0);
    FunctionalDatasetD ds(g, {"a", "b"}, rows);
    CHECK((mean_function(ds).values.array() - 1.0).abs().maxCoeff() == 0.0);

    FunctionalDatasetD single(g, {"a"}, rows.topRows(1));
    CHECK((mean_function(single).values - rows.row(0).transpose()).norm() == 0.0);
}

TEST_CASE("center: zero mean, degenerate spread, symmetry, idempotence") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    auto g = TimeGridD::event_grid(2, 26);
    MatrixXd rows(5, g.n_points);
    for (Index i = 0; i < rows.rows(); ++i)
        for (Index j = 0; j < rows.cols(); ++j) rows(i, j) = nd(rng);
    FunctionalDatasetD ds(g, {"u1", "u2", "u3", "u4", "u5"}, rows);

    auto c = center(ds);
    CHECK(c.curves.colwise().mean().cwiseAbs().maxCoeff() <= 1e-12);
    auto cc = center(c);
    CHECK((cc.curves - c.curves).cwiseAbs().maxCoeff() <= 1e-12);

    MatrixXd ident = MatrixXd::Constant(3, g.n_points, 4.2);
    FunctionalDatasetD di(g, {"a", "b", "c"}, ident);
    CHECK(center(di).curves.cwiseAbs().maxCoeff() == 0.0);

    MatrixXd two(2, g.n_points);
    two.row(0).setZero();
    two.row(1).setConstant(2.0);
    FunctionalDatasetD d2(g, {"a", "b"}, two);
    auto c2 = center(d2);
    CHECK((c2.curves.row(0).array() + 1.0).abs().maxCoeff() <= 1e-14);
    CHECK((c2.curves.row(1).array() - 1.0).abs().maxCoeff() <= 1e-14);
}

namespace {

// Brute-force modal depth, written independently of the library version.
VectorXd modal_depth_oracle(const MatrixXd& rows, const VectorXd& w) {
    const Index n = rows.rows();
    MatrixXd d(n, n);
    std::vector<double> nz;
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k) {
            VectorXd diff = (rows.row(i) - rows.row(k)).transpose();
            d(i, k) = std::sqrt((diff.array().square() * w.array()).sum());
            if (i < k && d(i, k) > 0) nz.push_back(d(i, k));
        }
    std::sort(nz.begin(), nz.end());
    double h = 1.0;
    if (!nz.empty()) {
        double pos = 0.15 * double(nz.size() - 1);
        std::size_t lo = std::size_t(pos);
        double frac = pos - double(lo);
        h = nz.size() == 1 ? nz[0] : nz[lo] + frac * (nz[lo + 1] - nz[lo]);
    }
    VectorXd out(n);
    const double k0 = 1.0 / std::sqrt(2.0 * M_PI);
    for (Index i = 0; i < n; ++i) {
        double s = 0;
        for (Index k = 0; k < n; ++k) s += k0 * std::exp(-0.5 * (d(i, k) / h) * (d(i, k) / h));
        out(i) = s;
    }
    return out;
}

Index argmax(const VectorXd& v) {
    Index best = 0;
    for (Index i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

}  // namespace

TEST_CASE("modal_depth: middle constant is deepest, matches brute force") {
    auto g = TimeGridD::event_grid(1, 26);
    MatrixXd rows(3, g.n_points);
    rows.row(0).setConstant(0.0);
    rows.row(1).setConstant(1.0);
    rows.row(2).setConstant(10.0);
    FunctionalDatasetD ds(g, {"a", "b", "c"}, rows);

    const VectorXd depth = modal_depth(ds);
    CHECK(argmax(depth) == 1);
    CHECK(depth(1) > depth(0));
    CHECK(depth(1) > depth(2));

    const VectorXd oracle = modal_depth_oracle(rows, quadrature_weights(g));
    CHECK((depth - oracle).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("modal_depth: identical curves tie; n<2 errors") {
    auto g = TimeGridD::event_grid(1, 26);
    MatrixXd rows = MatrixXd::Constant(4, g.n_points, 0.5);
    FunctionalDatasetD ds(g, {"a", "b", "c", "d"}, rows);
    const VectorXd depth = modal_depth(ds);
    CHECK((depth.array() - depth(0)).abs().maxCoeff() == 0.0);
    CHECK(deepest_index(ds) == 0);

    FunctionalDatasetD one(g, {"a"}, rows.topRows(1));
    CHECK_THROWS_AS(modal_depth(one), validation_error);
}

TEST_CASE("modal_depth argmax: shift and positive-scale invariance") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> nd;
    auto g = TimeGridD::event_grid(2, 26);
    const Index n = 12;
    MatrixXd rows(n, g.n_points);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < g.n_points; ++j) rows(i, j) = nd(rng);
    std::vector<std::string> ids;
    for (Index i = 0; i < n; ++i) ids.push_back("u" + std::to_string(i));

    FunctionalDatasetD ds(g, ids, rows);
    const Index base = argmax(modal_depth(ds));

    VectorXd shift(g.n_points);
    for (Index j = 0; j < g.n_points; ++j) shift(j) = std::sin(0.1 * double(j)) + 3.0;
    MatrixXd shifted = rows.rowwise() + shift.transpose();
    CHECK(argmax(modal_depth(FunctionalDatasetD(g, ids, shifted))) == base);

    MatrixXd scaled = 3.7 * rows;
    CHECK(argmax(modal_depth(FunctionalDatasetD(g, ids, scaled))) == base);

    // Brute-force re-check on the shifted data.
    const VectorXd oracle = modal_depth_oracle(shifted, quadrature_weights(g));
    CHECK(argmax(oracle) == base);
}

TEST_CASE("dataset validation") {
    auto g = TimeGridD::event_grid(1, 26);
    MatrixXd rows = MatrixXd::Zero(2, g.n_points);
    CHECK_THROWS_AS(FunctionalDatasetD(g, {"a", "a"}, rows), validation_error);
    CHECK_THROWS_AS(FunctionalDatasetD(g, {"a"}, rows), validation_error);
    MatrixXd bad = rows;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(FunctionalDatasetD(g, {"a", "b"}, bad), validation_error);
}
