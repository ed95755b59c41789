#include "firefda/synth.hpp"

#include <cmath>
#include <random>

namespace firefda::synth {

namespace {

struct Draws {
    Eigen::VectorXd veg, rain, aux;
    std::vector<std::string> landcover;
    Eigen::VectorXd factor_values;
};

Draws draw_covariates(const SynthConfig& cfg, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> unif;
    Draws d;
    d.veg.resize(cfg.n_units);
    d.rain.resize(cfg.n_units);
    d.aux.resize(cfg.n_units);
    d.factor_values.resize(cfg.n_units);
    for (Eigen::Index i = 0; i < cfg.n_units; ++i) {
        d.veg(i) = nd(rng);
        d.rain(i) = nd(rng);
        d.aux(i) = nd(rng);
        const double u = unif(rng);
        if (u < 0.5) {
            d.landcover.push_back("evergreen");
            d.factor_values(i) = 0.0;
        } else if (u < 0.8) {
            d.landcover.push_back("shrub");
            d.factor_values(i) = 0.003;
        } else {
            d.landcover.push_back("grass");
            d.factor_values(i) = -0.002;
        }
    }
    return d;
}

SyntheticTruth build_truth(const SynthConfig& cfg, std::uint64_t seed, const Draws& d,
                           const TimeGridD& grid) {
    SyntheticTruth truth;
    truth.seed = seed;
    truth.noise_sd = cfg.noise_sd;
    truth.veg = d.veg;
    truth.rain = d.rain;
    truth.aux = d.aux;
    truth.landcover = d.landcover;
    truth.factor_values = d.factor_values;

    const Eigen::VectorXd t = grid.points();
    truth.intercept_curve = (-0.08 + 0.005 * t.array()).matrix();
    truth.rain_varying = (0.02 * t.array() / 7.0).matrix();
    truth.smooth_veg_values.resize(cfg.n_units);
    truth.smooth_rain_values.resize(cfg.n_units);
    for (Eigen::Index i = 0; i < cfg.n_units; ++i) {
        truth.smooth_veg_values(i) = truth.smooth_veg(d.veg(i));
        truth.smooth_rain_values(i) = truth.smooth_rain(d.rain(i));
    }

    truth.signal.resize(cfg.n_units, grid.n_points);
    for (Eigen::Index i = 0; i < cfg.n_units; ++i)
        truth.signal.row(i) = (truth.intercept_curve.array() + truth.smooth_veg_values(i) +
                               truth.rain_varying.array() * d.rain(i) +
                               truth.smooth_rain_values(i) + truth.factor_values(i))
                                  .matrix()
                                  .transpose();
    return truth;
}

CovariateTableD build_table(const SynthConfig& cfg, const Draws& d) {
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < cfg.n_units; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "unit%04d", int(i));
        ids.push_back(buf);
    }
    CovariateTableD table(ids);
    table.add_numeric("veg", d.veg);
    table.add_numeric("rain", d.rain);
    table.add_numeric("aux", d.aux);
    table.add_categorical("landcover", d.landcover, "evergreen");
    return table;
}

}  // namespace

std::tuple<FunctionalDatasetD, CovariateTableD, SyntheticTruth> generate_dataset(
    const SynthConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto grid = TimeGridD::event_grid(cfg.years_post, cfg.points_per_year);
    const Draws d = draw_covariates(cfg, rng);
    SyntheticTruth truth = build_truth(cfg, seed, d, grid);
    CovariateTableD table = build_table(cfg, d);

    std::normal_distribution<double> nd;
    Eigen::MatrixXd rows = truth.signal;
    for (Eigen::Index i = 0; i < cfg.n_units; ++i)
        for (Eigen::Index a = 0; a < grid.n_points; ++a) rows(i, a) += cfg.noise_sd * nd(rng);

    return {FunctionalDatasetD(grid, table.unit_ids(), std::move(rows)), std::move(table),
            std::move(truth)};
}

std::tuple<std::vector<RawSeriesD>, CovariateTableD, SyntheticTruth> generate_raw(
    const SynthConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto grid = TimeGridD::event_grid(cfg.years_post, cfg.points_per_year);
    const Draws d = draw_covariates(cfg, rng);
    SyntheticTruth truth = build_truth(cfg, seed, d, grid);
    CovariateTableD table = build_table(cfg, d);

    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> unif;
    truth.seasonal_amplitude.resize(cfg.n_units);
    truth.seasonal_phase.resize(cfg.n_units);
    for (Eigen::Index i = 0; i < cfg.n_units; ++i) {
        truth.seasonal_amplitude(i) = cfg.seasonal_amp * (0.5 + unif(rng));
        truth.seasonal_phase(i) = 2.0 * M_PI * unif(rng);
    }

    const Eigen::Index pre = Eigen::Index(cfg.years_pre) * cfg.points_per_year;
    const Eigen::Index post = grid.n_points;
    const Eigen::Index len = pre + post;

    std::vector<RawSeriesD> series;
    series.reserve(std::size_t(cfg.n_units));
    for (Eigen::Index i = 0; i < cfg.n_units; ++i) {
        Eigen::VectorXd values(len);
        for (Eigen::Index j = 0; j < len; ++j) {
            double v = cfg.noise_sd * nd(rng);
            if (j >= pre) {
                const Eigen::Index a = j - pre;
                v += truth.signal(i, a) +
                     truth.seasonal_amplitude(i) *
                         std::sin(2.0 * M_PI * double(j) / double(cfg.points_per_year) +
                                  truth.seasonal_phase(i));
            }
            values(j) = v;
        }
        Eigen::VectorXi cal = Eigen::VectorXi::LinSpaced(int(len), 0, int(len) - 1);
        series.emplace_back(table.unit_ids()[std::size_t(i)], cal, values, pre);
    }
    return {std::move(series), std::move(table), std::move(truth)};
}

nlohmann::ordered_json truth_to_json(const SyntheticTruth& truth) {
    nlohmann::ordered_json j;
    j["seed"] = truth.seed;
    j["noise_sd"] = truth.noise_sd;
    auto vec = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    j["intercept_curve"] = vec(truth.intercept_curve);
    j["rain_varying"] = vec(truth.rain_varying);
    j["veg"] = vec(truth.veg);
    j["rain"] = vec(truth.rain);
    j["aux"] = vec(truth.aux);
    j["landcover"] = truth.landcover;
    j["smooth_veg_values"] = vec(truth.smooth_veg_values);
    j["smooth_rain_values"] = vec(truth.smooth_rain_values);
    j["factor_values"] = vec(truth.factor_values);
    if (truth.seasonal_amplitude.size() > 0) {
        j["seasonal_amplitude"] = vec(truth.seasonal_amplitude);
        j["seasonal_phase"] = vec(truth.seasonal_phase);
    }
    return j;
}

}  // namespace firefda::synth
