#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "firefda/common.hpp"
#include "firefda/grid.hpp"
#include "firefda/loess.hpp"

namespace firefda {

/// One raw effect series on a 16-day calendar. `calendar_index` must be
/// consecutive integers; gaps are represented through the missing mask
/// (filled upstream by ingestion). `event_pos` is the array position of t0.
template <typename Scalar = double>
struct RawSeries {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    std::string unit_id;
    Eigen::VectorXi calendar_index;
    Vector values;
    Eigen::Index event_pos{0};
    std::vector<char> missing;  // empty = fully observed

    RawSeries() = default;
    RawSeries(std::string id, Eigen::VectorXi calendar, Vector vals, Eigen::Index event,
              std::vector<char> miss = {})
        : unit_id(std::move(id)),
          calendar_index(std::move(calendar)),
          values(std::move(vals)),
          event_pos(event),
          missing(std::move(miss)) {
        if (values.size() != calendar_index.size())
            throw validation_error("RawSeries " + unit_id + ": values/calendar length mismatch");
        if (!missing.empty() && Eigen::Index(missing.size()) != values.size())
            throw validation_error("RawSeries " + unit_id + ": missing mask length mismatch");
        for (Eigen::Index i = 1; i < calendar_index.size(); ++i)
            if (calendar_index(i) != calendar_index(i - 1) + 1)
                throw validation_error("RawSeries " + unit_id +
                                       ": calendar_index must be consecutive");
        if (event_pos < 0 || event_pos >= values.size())
            throw validation_error("RawSeries " + unit_id + ": event position out of range");
        for (Eigen::Index i = 0; i < values.size(); ++i)
            if (!is_missing(i) && !std::isfinite(double(values(i))))
                throw validation_error("RawSeries " + unit_id + ": non-finite observed value");
    }

    bool is_missing(Eigen::Index i) const {
        return !missing.empty() && missing[std::size_t(i)];
    }
    Eigen::Index size() const { return values.size(); }
    Eigen::Index n_missing() const {
        return Eigen::Index(std::count(missing.begin(), missing.end(), char(1)));
    }
};

/// Additive trend/seasonal/remainder split. The three components always sum
/// to the observed value at non-missing points; the remainder is zero where
/// the observation is missing.
template <typename Scalar = double>
struct Decomposition {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    Vector trend;
    Vector seasonal;
    Vector remainder;
};

struct StlConfig {
    int period = 26;
    double seasonal_span = 0.4;  // fraction of each cycle-subseries
    int seasonal_degree = 1;
    int trend_window = 0;    // 0: smallest odd window > 1.5*period/(1 - 1.5/seasonal_window)
    int lowpass_window = 0;  // 0: smallest odd window >= period
    int inner_iters = 2;
    int robust_iters = 1;
};

namespace detail {

template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> moving_average(
    const Eigen::Vector<Scalar, Eigen::Dynamic>& v, Eigen::Index width) {
    const Eigen::Index m = v.size() - width + 1;
    Eigen::Vector<Scalar, Eigen::Dynamic> out(m);
    Scalar acc = v.head(width).sum();
    out(0) = acc / Scalar(width);
    for (Eigen::Index i = 1; i < m; ++i) {
        acc += v(i + width - 1) - v(i - 1);
        out(i) = acc / Scalar(width);
    }
    return out;
}

inline int make_odd(int w) { return w % 2 == 0 ? w + 1 : w; }

}  // namespace detail

/// Seasonal-trend decomposition using LOESS: cycle-subseries smoothing for
/// the seasonal, a moving-average/LOESS low-pass to keep trend content out
/// of it, LOESS for the trend, and bisquare robustness weights in the outer
/// loop. After the final pass the seasonal is balanced so that every
/// complete cycle window has zero mean, with the removed step absorbed by
/// the remainder.
template <typename Scalar>
Decomposition<Scalar> stl_decompose(const RawSeries<Scalar>& s, const StlConfig& cfg = {}) {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    const Eigen::Index n = s.size();
    const Eigen::Index p = cfg.period;
    if (p < 2) throw validation_error("stl_decompose: period must be at least 2");
    if (n < 2 * p)
        throw validation_error("stl_decompose: series " + s.unit_id + " shorter than 2 periods (" +
                               std::to_string(n) + " < " + std::to_string(2 * p) + ")");

    const Eigen::Index n_sub_max = (n + p - 1) / p;
    const Eigen::Index q_seasonal =
        std::max<Eigen::Index>(Eigen::Index(std::ceil(cfg.seasonal_span * double(n_sub_max))), 2);
    const int q_lowpass =
        cfg.lowpass_window > 0 ? cfg.lowpass_window : detail::make_odd(int(p));
    const int q_trend = cfg.trend_window > 0
                            ? cfg.trend_window
                            : detail::make_odd(int(std::floor(
                                  1.5 * double(p) / (1.0 - 1.5 / double(q_seasonal)))) + 1);

    const Vector& y = s.values;
    Vector positions = Vector::LinSpaced(n, Scalar(0), Scalar(n - 1));
    Vector rho = Vector::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (s.is_missing(i)) rho(i) = Scalar(0);

    Vector trend = Vector::Zero(n);
    Vector seasonal = Vector::Zero(n);

    const int outer_passes = cfg.robust_iters + 1;
    for (int outer = 0; outer < outer_passes; ++outer) {
        for (int inner = 0; inner < std::max(cfg.inner_iters, 1); ++inner) {
            const Vector detrended = y - trend;

            // Cycle-subseries smoothing, extended one period at each end.
            Vector extended(n + 2 * p);
            for (Eigen::Index k = 0; k < p; ++k) {
                const Eigen::Index m = (n - k + p - 1) / p;
                Vector sub_x(m), sub_y(m), sub_w(m);
                for (Eigen::Index c = 0; c < m; ++c) {
                    sub_x(c) = Scalar(c);
                    sub_y(c) = detrended(k + c * p);
                    sub_w(c) = rho(k + c * p);
                }
                Vector targets = Vector::LinSpaced(m + 2, Scalar(-1), Scalar(m));
                const Vector fit = detail::loess_fit(sub_x, sub_y, sub_w, targets,
                                                     std::min(q_seasonal, m),
                                                     cfg.seasonal_degree);
                for (Eigen::Index c = 0; c < m + 2; ++c)
                    extended(k + c * p) = fit(c);
            }

            // Low-pass: two averages of length p, one of length 3, then LOESS.
            Vector low = detail::moving_average(extended, p);
            low = detail::moving_average(low, p);
            low = detail::moving_average(low, 3);
            low = detail::loess_fit(positions, low, Vector(), positions,
                                    std::min<Eigen::Index>(q_lowpass, n), 1);

            seasonal = extended.segment(p, n) - low;

            const Vector deseasonalized = y - seasonal;
            trend = detail::loess_fit(positions, deseasonalized, rho, positions,
                                      std::min<Eigen::Index>(q_trend, n), 1);
        }

        if (outer + 1 < outer_passes) {
            Vector resid = y - trend - seasonal;
            std::vector<char> mask(s.missing.begin(), s.missing.end());
            const Scalar med = detail::median_abs(resid, mask);
            if (med <= Scalar(0)) break;
            for (Eigen::Index i = 0; i < n; ++i)
                rho(i) = s.is_missing(i)
                             ? Scalar(0)
                             : detail::bisquare(resid(i) / (Scalar(6) * med));
        }
    }

    // Balance pass: every complete cycle window of the seasonal gets exactly
    // zero mean; the subtracted step lands in the remainder.
    for (Eigen::Index c = 0; c + p <= n; c += p)
        seasonal.segment(c, p).array() -= seasonal.segment(c, p).mean();

    Decomposition<Scalar> out;
    out.trend = trend;
    out.seasonal = seasonal;
    out.remainder = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (!s.is_missing(i)) out.remainder(i) = y(i) - trend(i) - seasonal(i);
    return out;
}

/// Trend over the first n_post post-event points. The decomposition runs on
/// the post-event window only: the effect series typically jumps at the
/// event (near-zero before, an immediate drop after), and smoothing across
/// that discontinuity would bleed it into the start of the extracted trend.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> extract_trend(const RawSeries<Scalar>& s,
                                                    const StlConfig& cfg = {},
                                                    Eigen::Index n_post = 182) {
    const Eigen::Index avail = s.size() - s.event_pos;
    if (avail < n_post)
        throw validation_error("extract_trend: unit " + s.unit_id + " has only " +
                               std::to_string(avail) + " post-event points, need " +
                               std::to_string(n_post));
    RawSeries<Scalar> post(
        s.unit_id, s.calendar_index.segment(s.event_pos, avail),
        s.values.segment(s.event_pos, avail), 0,
        s.missing.empty() ? std::vector<char>{}
                          : std::vector<char>(s.missing.begin() + s.event_pos, s.missing.end()));
    const auto dec = stl_decompose(post, cfg);
    return dec.trend.head(n_post);
}

/// Aligns per-unit trend vectors at t0 = 0 into one functional dataset.
template <typename Scalar>
FunctionalDataset<Scalar> align_trends(
    const std::vector<std::pair<std::string, Eigen::Vector<Scalar, Eigen::Dynamic>>>& trends,
    const TimeGrid<Scalar>& grid) {
    if (trends.empty()) throw validation_error("align_trends: no trends given");
    typename FunctionalDataset<Scalar>::Matrix rows(Eigen::Index(trends.size()), grid.n_points);
    std::vector<std::string> ids;
    ids.reserve(trends.size());
    for (std::size_t i = 0; i < trends.size(); ++i) {
        if (trends[i].second.size() != grid.n_points)
            throw validation_error("align_trends: unit " + trends[i].first + " has length " +
                                   std::to_string(trends[i].second.size()) + ", expected " +
                                   std::to_string(grid.n_points));
        rows.row(Eigen::Index(i)) = trends[i].second.transpose();
        ids.push_back(trends[i].first);
    }
    return FunctionalDataset<Scalar>(grid, std::move(ids), std::move(rows));
}

using RawSeriesD = RawSeries<double>;
using DecompositionD = Decomposition<double>;

}  // namespace firefda
