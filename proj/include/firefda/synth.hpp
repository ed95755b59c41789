#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "firefda/covariates.hpp"
#include "firefda/grid.hpp"
#include "firefda/stl.hpp"

namespace firefda::synth {

/// Generator settings. The generating functions are fixed closed forms:
///   intercept(t)   = -0.08 + 0.005 t
///   s_veg(x)       = 0.05 tanh(x)            (Smooth term)
///   beta_rain(t)   = 0.02 t / 7              (varying part of rain)
///   s_rain(x)      = 0.03 sin(x)             (smooth part of rain)
///   landcover      = {evergreen: 0, shrub: +0.003, grass: -0.002}
/// plus one pure-noise covariate ("aux") that never enters the signal.
struct SynthConfig {
    Eigen::Index n_units = 243;
    int points_per_year = 26;
    int years_post = 7;
    int years_pre = 5;
    double noise_sd = 0.01;
    double seasonal_amp = 0.05;  // per-unit amplitude scale for raw series
};

/// Everything needed to act as an oracle for fits on the generated data.
struct SyntheticTruth {
    std::uint64_t seed{};
    double noise_sd{};
    Eigen::VectorXd intercept_curve;  // on the post-event grid
    Eigen::VectorXd rain_varying;     // beta_rain on the grid
    Eigen::VectorXd veg;              // raw covariate draws
    Eigen::VectorXd rain;
    Eigen::VectorXd aux;
    std::vector<std::string> landcover;
    Eigen::VectorXd smooth_veg_values;   // s_veg(veg_i)
    Eigen::VectorXd smooth_rain_values;  // s_rain(rain_i)
    Eigen::VectorXd factor_values;       // landcover effect per unit
    Eigen::MatrixXd signal;              // n x N post-event signal
    Eigen::VectorXd seasonal_amplitude;  // raw-series mode only
    Eigen::VectorXd seasonal_phase;

    double smooth_veg(double x) const { return 0.05 * std::tanh(x); }
    double smooth_rain(double x) const { return 0.03 * std::sin(x); }
};

/// Functional dataset drawn directly on the post-event grid: signal plus
/// iid Gaussian noise at every grid point. This is the oracle-friendly
/// input for regression recovery checks.
std::tuple<FunctionalDatasetD, CovariateTableD, SyntheticTruth> generate_dataset(
    const SynthConfig& cfg, std::uint64_t seed);

/// Raw effect series for the decomposition pipeline: zero (plus noise)
/// before the event, signal + per-unit seasonal + noise after it.
std::tuple<std::vector<RawSeriesD>, CovariateTableD, SyntheticTruth> generate_raw(
    const SynthConfig& cfg, std::uint64_t seed);

nlohmann::ordered_json truth_to_json(const SyntheticTruth& truth);

}  // namespace firefda::synth
