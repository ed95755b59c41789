#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "firefda/loess.hpp"

using namespace firefda;
using Eigen::Index;
using Eigen::VectorXd;

TEST_CASE("local linear reproduces a global linear function for any span") {
    const Index n = 60;
    VectorXd x = VectorXd::LinSpaced(n, 0.0, 5.9);
    VectorXd y = 2.5 * x.array() - 1.25;
    for (double span : {0.1, 0.3, 0.7, 1.0}) {
        VectorXd fit = loess_smooth(x, y, span, 1);
        CHECK((fit - y).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("degree 0 reproduces a constant") {
    VectorXd x = VectorXd::LinSpaced(40, 0.0, 1.0);
    VectorXd y = VectorXd::Constant(40, 5.0);
    VectorXd fit = loess_smooth(x, y, 0.25, 0);
    CHECK((fit.array() - 5.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("degree 2 reproduces a quadratic") {
    VectorXd x = VectorXd::LinSpaced(50, -1.0, 1.0);
    VectorXd y = 3.0 * x.array().square() - x.array() + 0.5;
    VectorXd fit = loess_smooth(x, y, 0.4, 2);
    CHECK((fit - y).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("robustness iterations defuse a gross outlier") {
    const Index n = 80;
    VectorXd x = VectorXd::LinSpaced(n, 0.0, 4.0);
    VectorXd clean = 0.3 * x.array().square() + 0.1 * x.array();
    VectorXd dirty = clean;
    const Index at = 37;
    dirty(at) += 25.0;

    // Oracle: fit the series with the outlier removed, evaluate at x(at).
    VectorXd x_wo(n - 1), y_wo(n - 1);
    Index k = 0;
    for (Index i = 0; i < n; ++i) {
        if (i == at) continue;
        x_wo(k) = x(i);
        y_wo(k) = clean(i);
        ++k;
    }
    VectorXd targets(1);
    targets << x(at);
    const double oracle =
        detail::loess_fit(x_wo, y_wo, VectorXd(), targets, Index(std::ceil(0.3 * (n - 1))), 2)(0);

    VectorXd robust = loess_smooth(x, dirty, 0.3, 2, 2);
    CHECK(std::abs(robust(at) - oracle) <= 0.05 * std::max(std::abs(oracle), 1.0));

    VectorXd naive = loess_smooth(x, dirty, 0.3, 2, 0);
    CHECK(std::abs(naive(at) - oracle) > std::abs(robust(at) - oracle));
}

TEST_CASE("input validation") {
    VectorXd x = VectorXd::LinSpaced(10, 0.0, 1.0);
    VectorXd y = x;
    CHECK_THROWS_AS(loess_smooth(x, y, 0.05, 2), validation_error);  // window < degree+1
    CHECK_THROWS_AS(loess_smooth(x, y, 1.5, 1), validation_error);
    CHECK_THROWS_AS(loess_smooth(x, y, 0.5, 3), validation_error);
    VectorXd bad = y;
    bad(3) = std::nan("");
    CHECK_THROWS_AS(loess_smooth(x, bad, 0.5, 1), validation_error);
    VectorXd xdec = x.reverse();
    CHECK_THROWS_AS(loess_smooth(xdec, y, 0.5, 1), validation_error);
    VectorXd yshort = y.head(5);
    CHECK_THROWS_AS(loess_smooth(x, yshort, 0.5, 1), validation_error);
}

TEST_CASE("zero prior weights are interpolated over") {
    const Index n = 50;
    VectorXd x = VectorXd::LinSpaced(n, 0.0, 2.0);
    VectorXd y = 1.5 * x.array() + 0.2;
    VectorXd prior = VectorXd::Ones(n);
    for (Index i = 20; i < 25; ++i) {
        prior(i) = 0.0;
        y(i) = 1e6;  // masked points must not influence the fit
    }
    VectorXd fit = detail::loess_fit(x, y, prior, x, Index(20), 1);
    for (Index i = 20; i < 25; ++i)
        CHECK(std::abs(fit(i) - (1.5 * x(i) + 0.2)) <= 1e-8);
}
