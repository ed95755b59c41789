#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "firefda/stl.hpp"

using namespace firefda;
using Eigen::Index;
using Eigen::VectorXd;

namespace {

RawSeriesD make_series(const VectorXd& values, Index event_pos = 0,
                       std::vector<char> missing = {}) {
    Eigen::VectorXi cal = Eigen::VectorXi::LinSpaced(int(values.size()), 0,
                                                     int(values.size()) - 1);
    return RawSeriesD("unit", cal, values, event_pos, std::move(missing));
}

double rmse(const VectorXd& a, const VectorXd& b, Index from = 0, Index len = -1) {
    if (len < 0) len = a.size() - from;
    return std::sqrt((a.segment(from, len) - b.segment(from, len)).squaredNorm() / double(len));
}

}  // namespace

TEST_CASE("pure linear ramp: trend matches, seasonal vanishes") {
    const Index n = 312;
    VectorXd t = VectorXd::LinSpaced(n, 0.0, double(n - 1));
    VectorXd ramp = 0.002 * t.array() - 0.1;
    const double range = ramp.maxCoeff() - ramp.minCoeff();

    auto dec = stl_decompose(make_series(ramp), StlConfig{});
    CHECK((dec.trend - ramp).cwiseAbs().maxCoeff() <= 1e-6 * range);
    CHECK(dec.seasonal.cwiseAbs().maxCoeff() <= 1e-6 * range);
}

TEST_CASE("pure sinusoid: seasonal recovered, trend near zero") {
    const Index n = 312;
    const double amp = 0.1;
    VectorXd truth(n);
    for (Index j = 0; j < n; ++j) truth(j) = amp * std::sin(2.0 * M_PI * double(j) / 26.0);

    auto dec = stl_decompose(make_series(truth), StlConfig{});
    // Discard one period at each boundary for the transient.
    CHECK(rmse(dec.seasonal, truth, 26, n - 52) <= 0.01 * amp);
    VectorXd zero = VectorXd::Zero(n);
    CHECK(rmse(dec.trend, zero, 26, n - 52) <= 0.01 * amp);
}

TEST_CASE("ramp + sinusoid + noise: additivity and recovery") {
    std::mt19937_64 rng(314);
    std::normal_distribution<double> noise(0.0, 0.01);
    const Index n = 312;
    const double amp = 0.1;
    VectorXd ramp(n), seasonal(n), y(n);
    for (Index j = 0; j < n; ++j) {
        ramp(j) = -0.1 + 0.5 * double(j) / double(n);
        seasonal(j) = amp * std::sin(2.0 * M_PI * double(j) / 26.0);
        y(j) = ramp(j) + seasonal(j) + noise(rng);
    }

    auto dec = stl_decompose(make_series(y), StlConfig{});
    CHECK((y - dec.trend - dec.seasonal - dec.remainder).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(rmse(dec.trend, ramp) <= 0.03);
    CHECK(rmse(dec.seasonal, seasonal, 26, n - 52) <= 0.03);
}

TEST_CASE("seasonal balance: every complete cycle window has zero mean") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 0.02);
    const Index n = 312;
    VectorXd y(n);
    for (Index j = 0; j < n; ++j)
        y(j) = 0.001 * double(j) + 0.08 * std::sin(2.0 * M_PI * double(j) / 26.0 + 0.7) +
               noise(rng);
    auto dec = stl_decompose(make_series(y), StlConfig{});
    for (Index c = 0; c + 26 <= n; c += 26)
        CHECK(std::abs(dec.seasonal.segment(c, 26).mean()) <= 1e-8);
}

TEST_CASE("phase independence: shifted input gives shifted seasonal") {
    const Index n = 312;
    const double amp = 0.1;
    const Index shift = 9;
    VectorXd base(n), shifted(n);
    for (Index j = 0; j < n; ++j) {
        base(j) = amp * std::sin(2.0 * M_PI * double(j) / 26.0);
        shifted(j) = amp * std::sin(2.0 * M_PI * double(j + shift) / 26.0);
    }
    auto d0 = stl_decompose(make_series(base), StlConfig{});
    auto d1 = stl_decompose(make_series(shifted), StlConfig{});
    // Compare d1.seasonal(j) with d0.seasonal(j + shift) away from boundaries.
    double acc = 0;
    Index count = 0;
    for (Index j = 26; j + shift < n - 26; ++j) {
        const double diff = d1.seasonal(j) - d0.seasonal(j + shift);
        acc += diff * diff;
        ++count;
    }
    CHECK(std::sqrt(acc / double(count)) <= 0.02 * amp);
}

TEST_CASE("missing values: additivity at observed points, trend still tracks") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::uniform_real_distribution<double> unif;
    const Index n = 312;
    VectorXd ramp(n), y(n);
    std::vector<char> missing(std::size_t(n), 0);
    for (Index j = 0; j < n; ++j) {
        ramp(j) = 0.3 * double(j) / double(n);
        y(j) = ramp(j) + 0.05 * std::sin(2.0 * M_PI * double(j) / 26.0) + noise(rng);
        if (unif(rng) < 0.10 && j > 0 && j < n - 1) missing[std::size_t(j)] = 1;
    }
    auto s = make_series(y, 0, missing);
    auto dec = stl_decompose(s, StlConfig{});
    for (Index j = 0; j < n; ++j) {
        if (s.is_missing(j)) {
            CHECK(dec.remainder(j) == 0.0);
        } else {
            CHECK(std::abs(y(j) - dec.trend(j) - dec.seasonal(j) - dec.remainder(j)) <= 1e-10);
        }
    }
    CHECK(rmse(dec.trend, ramp) <= 0.03);
}

TEST_CASE("length not a multiple of the period still decomposes cleanly") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> noise(0.0, 0.01);
    const Index n = 300;  // 11 complete cycles + 14 points
    VectorXd y(n);
    for (Index j = 0; j < n; ++j)
        y(j) = 0.001 * double(j) + 0.07 * std::sin(2.0 * M_PI * double(j) / 26.0) + noise(rng);
    auto dec = stl_decompose(make_series(y), StlConfig{});
    CHECK((y - dec.trend - dec.seasonal - dec.remainder).cwiseAbs().maxCoeff() <= 1e-10);
    for (Index c = 0; c + 26 <= n; c += 26)
        CHECK(std::abs(dec.seasonal.segment(c, 26).mean()) <= 1e-8);
}

TEST_CASE("series shorter than two periods errors") {
    VectorXd y = VectorXd::Zero(40);
    CHECK_THROWS_AS(stl_decompose(make_series(y), StlConfig{}), validation_error);
}

TEST_CASE("extract_trend: noiseless linear effect gives the post-event ramp") {
    const Index pre = 130, post = 182, n = pre + post;
    VectorXd y(n);
    for (Index j = 0; j < n; ++j) y(j) = -0.002 * double(j);
    auto s = make_series(y, pre);
    VectorXd trend = extract_trend(s, StlConfig{}, post);
    CHECK(trend.size() == 182);
    CHECK((trend - y.segment(pre, post)).cwiseAbs().maxCoeff() <= 1e-6 * 0.002 * double(n));
}

TEST_CASE("extract_trend: seasonal-only series leaves a near-zero trend") {
    const Index n = 312;
    const double amp = 0.2;
    VectorXd y(n);
    for (Index j = 0; j < n; ++j) y(j) = amp * std::cos(2.0 * M_PI * double(j) / 26.0);
    VectorXd trend = extract_trend(make_series(y, 26), StlConfig{}, 182);
    CHECK(trend.cwiseAbs().maxCoeff() <= 0.02 * amp);
}

TEST_CASE("extract_trend: too few post-event points errors") {
    VectorXd y = VectorXd::Zero(200);
    CHECK_THROWS_AS(extract_trend(make_series(y, 50), StlConfig{}, 182), validation_error);
}

TEST_CASE("align_trends: shapes, order, and length mismatch diagnostics") {
    auto grid = TimeGridD::event_grid(7, 26);
    std::vector<std::pair<std::string, VectorXd>> trends;
    for (int i = 0; i < 5; ++i)
        trends.emplace_back("unit" + std::to_string(i),
                            VectorXd::Constant(grid.n_points, double(i)));
    auto ds = align_trends(trends, grid);
    CHECK(ds.n_units() == 5);
    CHECK(ds.grid.n_points == 182);
    CHECK(ds.unit_ids[3] == "unit3");
    CHECK(ds.curves(3, 0) == 3.0);

    auto single = align_trends({{"only", VectorXd::Zero(grid.n_points)}}, grid);
    CHECK(single.n_units() == 1);

    trends[2].second = VectorXd::Zero(100);
    try {
        align_trends(trends, grid);
        FAIL("expected validation_error");
    } catch (const validation_error& e) {
        CHECK(std::string(e.what()).find("unit2") != std::string::npos);
    }
}

TEST_CASE("RawSeries validation") {
    VectorXd y = VectorXd::Zero(60);
    Eigen::VectorXi gap(60);
    for (int i = 0; i < 60; ++i) gap(i) = i < 30 ? i : i + 5;
    CHECK_THROWS_AS(RawSeriesD("u", gap, y, 0), validation_error);
    Eigen::VectorXi cal = Eigen::VectorXi::LinSpaced(60, 0, 59);
    CHECK_THROWS_AS(RawSeriesD("u", cal, y, 60), validation_error);
    VectorXd bad = y;
    bad(5) = std::nan("");
    CHECK_THROWS_AS(RawSeriesD("u", cal, bad, 0), validation_error);
    std::vector<char> miss(60, 0);
    miss[5] = 1;
    RawSeriesD ok("u", cal, bad, 0, miss);  // masked NaN is allowed
    CHECK(ok.n_missing() == 1);
}
